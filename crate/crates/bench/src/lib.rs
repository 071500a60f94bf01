//! Benchmark fixtures shared by the criterion targets.

use betaproc_core::factor::{generate_synthetic_with_k, initial_state};
use betaproc_core::{BPParams, FactorHyper, FactorState, MCMCConfig, RandomStream};
use nalgebra::DMatrix;

/// A small synthetic factor-analysis problem and a starting state.
pub fn factor_problem(n: usize, p: usize) -> (DMatrix<f64>, FactorHyper, MCMCConfig, FactorState) {
    let hyper = FactorHyper::new(0.1, 1.0, vec![1.0; p]).unwrap();
    let truth = BPParams::new(1.0, 1.0, 0.5).unwrap();
    let (x, _) = generate_synthetic_with_k(&truth, &hyper, n, 200, 5, &mut RandomStream::new(1, 2)).unwrap();
    let config = MCMCConfig { iterations: 1, burn_in: 0, ..Default::default() };
    let init = initial_state(&x, &config, &hyper, &mut RandomStream::new(1, 3)).unwrap();
    (x, hyper, config, init)
}
