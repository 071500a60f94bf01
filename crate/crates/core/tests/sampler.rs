//! End-to-end behaviour of the factor-model sampler.

use betaproc_core::factor::{generate_synthetic_with_k, initial_state, run_mcmc};
use betaproc_core::powerlaw::phi_value;
use betaproc_core::{BPParams, CurveKind, FactorHyper, MCMCConfig, RandomStream};
use nalgebra::DMatrix;

fn synthetic(alpha: f64, n: usize, seed: u64) -> (DMatrix<f64>, FactorHyper) {
    let hyper = FactorHyper::new(0.1, 1.0, vec![1.0; 8]).unwrap();
    let truth = BPParams::new(1.0, 1.0, alpha).unwrap();
    let mut s = RandomStream::new(seed, 2);
    let (x, _) = generate_synthetic_with_k(&truth, &hyper, n, 200, 4, &mut s).unwrap();
    (x, hyper)
}

#[test]
fn identical_configuration_gives_identical_traces() {
    let (x, hyper) = synthetic(0.5, 30, 21);
    let config = MCMCConfig { iterations: 25, burn_in: 5, seed: 3, ..Default::default() };
    let run = || {
        let init = initial_state(&x, &config, &hyper, &mut RandomStream::new(3, 3)).unwrap();
        run_mcmc(&x, &config, &hyper, init).unwrap()
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a.records, b.records);
    assert_eq!(sa, sb);
    let other = MCMCConfig { seed: 4, ..config };
    let init = initial_state(&x, &other, &hyper, &mut RandomStream::new(3, 3)).unwrap();
    let (c, _) = run_mcmc(&x, &other, &hyper, init).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn zero_iterations_returns_the_initial_state() {
    let (x, hyper) = synthetic(0.5, 20, 22);
    let config = MCMCConfig { iterations: 0, burn_in: 0, ..Default::default() };
    let init = initial_state(&x, &config, &hyper, &mut RandomStream::new(1, 3)).unwrap();
    let (trace, state) = run_mcmc(&x, &config, &hyper, init.clone()).unwrap();
    assert_eq!(trace.len(), 1);
    assert_eq!(trace.records[0].k, init.k());
    assert_eq!(state, init);
}

#[test]
fn state_stays_consistent_and_hyperparameters_in_range() {
    let (x, hyper) = synthetic(0.5, 40, 23);
    let config = MCMCConfig { iterations: 60, burn_in: 10, seed: 8, ..Default::default() };
    let mut init_stream = RandomStream::new(8, 3);
    let init = initial_state(&x, &config, &hyper, &mut init_stream).unwrap();
    let (trace, state) = run_mcmc(&x, &config, &hyper, init).unwrap();
    state.check_consistency().unwrap();
    for r in &trace.records {
        assert!(r.theta > 0.0 && r.theta <= config.theta_max);
        assert!((0.0..1.0).contains(&r.alpha));
        assert!(r.gamma > 0.0 && r.rmse.is_finite() && r.log_lik.is_finite());
    }
}

#[test]
fn discount_is_recovered_from_heavy_tailed_data() {
    let (x, hyper) = synthetic(0.6, 200, 24);
    let config = MCMCConfig { iterations: 1000, burn_in: 250, seed: 24, ..Default::default() };
    let init = initial_state(&x, &config, &hyper, &mut RandomStream::new(24, 3)).unwrap();
    let (trace, _) = run_mcmc(&x, &config, &hyper, init).unwrap();
    let alpha = trace.mean_after(config.burn_in, |r| r.alpha).unwrap();
    assert!((0.4..=0.8).contains(&alpha), "posterior mean alpha {alpha}");
}

/// With a flat likelihood the chain should sample K from its prior, whose
/// mean is the expected feature count. Columns are never born, so a chain
/// started below the prior mean cannot climb to it.
#[test]
#[ignore = "needs column birth moves, which the sampler does not make; run with --ignored"]
fn flat_likelihood_chain_matches_the_prior_feature_count() {
    let n = 50;
    let hyper = FactorHyper::new(1e8, 1.0, vec![1.0; 2]).unwrap();
    let x = DMatrix::zeros(n, 2);
    let config = MCMCConfig { iterations: 1500, burn_in: 500, seed: 25, ..Default::default() };
    let init = initial_state(&x, &config, &hyper, &mut RandomStream::new(25, 3)).unwrap();
    let (trace, _) = run_mcmc(&x, &config, &hyper, init).unwrap();
    let mean_k = trace.mean_after(config.burn_in, |r| r.k as f64).unwrap();
    let params = BPParams::new(
        trace.mean_after(config.burn_in, |r| r.gamma).unwrap(),
        trace.mean_after(config.burn_in, |r| r.theta).unwrap(),
        trace.mean_after(config.burn_in, |r| r.alpha).unwrap(),
    )
    .unwrap();
    let expected = phi_value(&params, CurveKind::PhiN, n as f64).unwrap().value;
    assert!((mean_k / expected - 1.0).abs() <= 0.10, "mean K {mean_k}, expected {expected}");
}
