//! Distributional laws of the stick-breaking sampler and the Bernoulli process.

use betaproc_core::bep::{bep_row_counts, bp_bep, count_stats};
use betaproc_core::bp::{residual_mass_estimate, stick_break, stick_break_traced};
use betaproc_core::powerlaw::{phi_value, two_param_phi};
use betaproc_core::{BPParams, CurveKind, RandomStream};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn traced_sticks_reconstruct_every_weight() {
    let p = BPParams::new(2.0, 1.5, 0.4).unwrap();
    let mut s = RandomStream::new(11, 0);
    let (draw, trace) = stick_break_traced(&p, 60, &mut s).unwrap();
    assert_eq!(trace.sticks.len(), draw.len());
    for (i, &w) in draw.weights.iter().enumerate() {
        assert!((w - trace.reconstruct(i)).abs() <= 1e-12 * w, "atom {i}");
    }
}

#[test]
fn mean_mass_is_gamma_across_concentrations() {
    // Small-α draws converge quickly; α = 0.6 needs far more rounds and is
    // covered by the acceptance run.
    for (k, alpha) in [0.0, 0.3].into_iter().enumerate() {
        for (j, theta) in [0.5, 1.0, 5.0].into_iter().enumerate() {
            let p = BPParams::new(3.0, theta, alpha).unwrap();
            let mut s = RandomStream::new(12, (10 * k + j) as u64);
            let masses: Vec<f64> = (0..3000).map(|_| stick_break(&p, 300, &mut s).unwrap().total_mass()).collect();
            let (m, sd) = mean_sd(&masses);
            let se = sd / (masses.len() as f64).sqrt();
            assert!((m - 3.0).abs() <= 0.1, "alpha={alpha} theta={theta}: mean {m} (se {se})");
        }
    }
}

#[test]
fn residual_mass_examples() {
    let p = BPParams::new(3.0, 1.0, 0.0).unwrap();
    let mut s = RandomStream::new(13, 0);
    let long = residual_mass_estimate(&p, 500, 2000, &mut s).unwrap();
    assert!(long.abs() <= 0.05, "{long}");
    let one = residual_mass_estimate(&p, 1, 20_000, &mut s).unwrap();
    assert!((one - 1.5).abs() <= 0.05, "{one}");
}

#[test]
fn row_sums_average_the_total_mass() {
    let p = BPParams::new(3.0, 1.0, 0.3).unwrap();
    let mut s = RandomStream::new(14, 0);
    let draw = stick_break(&p, 200, &mut s).unwrap();
    let counts = bep_row_counts(&draw, 50_000, &mut s);
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (m, sd) = mean_sd(&xs);
    let se = sd / (xs.len() as f64).sqrt();
    assert!((m - draw.total_mass()).abs() <= 4.0 * se, "mean {m}, mass {}", draw.total_mass());
}

#[test]
fn two_parameter_feature_count() {
    let p = BPParams::new(3.0, 1.0, 0.0).unwrap();
    let exact = two_param_phi(&p, 1000).unwrap().phi_n;
    // Row n+1 brings Poisson(γθ/(θ+n)) new features, so E K_N = 3 H_1000.
    let harmonic: f64 = (1..=1000).map(|k| 1.0 / k as f64).sum();
    assert!((exact - 3.0 * harmonic).abs() < 1e-10);
    let ks: Vec<f64> = (0..20)
        .map(|sd| {
            let mut s = RandomStream::new(15, sd);
            bp_bep(&p, 1000, 2000, &mut s).unwrap().n_cols() as f64
        })
        .collect();
    let (m, _) = mean_sd(&ks);
    // K_N is Poisson given the construction, so its variance equals its mean.
    let se = (exact / ks.len() as f64).sqrt();
    assert!((m - exact).abs() <= 4.0 * se, "mean {m}, exact {exact}");
}

#[test]
fn rows_are_exchangeable() {
    let p = BPParams::new(3.0, 1.0, 0.5).unwrap();
    let mut diffs = Vec::new();
    for sd in 0..20 {
        let mut s = RandomStream::new(16, sd);
        let z = bp_bep(&p, 200, 500, &mut s).unwrap();
        let rows = count_stats(&z).row_counts;
        let first = rows[..100].iter().sum::<usize>() as f64 / 100.0;
        let second = rows[100..].iter().sum::<usize>() as f64 / 100.0;
        diffs.push(first - second);
    }
    let (m, sd) = mean_sd(&diffs);
    assert!(m.abs() <= 4.0 * sd / (diffs.len() as f64).sqrt(), "mean difference {m}, sd {sd}");
}

#[test]
fn quadrature_matches_simulated_singletons() {
    let p = BPParams::new(3.0, 1.0, 0.3).unwrap();
    let n = 200;
    let exact = phi_value(&p, CurveKind::PhiNj(1), n as f64).unwrap().value;
    let singles: Vec<f64> = (0..200)
        .map(|sd| {
            let mut s = RandomStream::new(17, sd);
            let z = bp_bep(&p, n, 2000, &mut s).unwrap();
            *count_stats(&z).k_hist.get(&1).unwrap_or(&0) as f64
        })
        .collect();
    let (m, sd) = mean_sd(&singles);
    assert!((m - exact).abs() <= 4.0 * sd / (singles.len() as f64).sqrt(), "mean {m}, exact {exact}");
}
