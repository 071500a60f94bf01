//! Synthetic data from the generative model.

use nalgebra::DMatrix;

use super::{FactorHyper, FactorState};
use crate::bep::{bep_matrix, FeatureMatrix};
use crate::bp::{stick_break, BPParams, BetaProcessDraw};
use crate::error::{Error, Result};
use crate::powerlaw::{phi_value, CurveKind};
use crate::stats::{sample_normal, RandomStream};

fn check_variances(hyper: &FactorHyper) -> Result<()> {
    let ok = |v: f64| v >= 0.0 && v.is_finite();
    if !ok(hyper.eta) || !ok(hyper.zeta) || hyper.rho.is_empty() || !hyper.rho.iter().all(|&r| ok(r)) {
        return Err(Error::domain("synthetic data needs nonnegative finite variances and at least one rho"));
    }
    Ok(())
}

fn assemble(
    params: BPParams,
    hyper: &FactorHyper,
    z: FeatureMatrix,
    draw: &BetaProcessDraw,
    stream: &mut RandomStream,
) -> (DMatrix<f64>, FactorState) {
    let (n, k, p) = (z.n_rows(), z.n_cols(), hyper.p());
    let r = z.atoms().iter().map(|&a| draw.rounds[a]).collect();
    let w = DMatrix::from_fn(n, k, |_, _| sample_normal(stream, 0.0, hyper.zeta.sqrt()));
    let phi = DMatrix::from_fn(k, p, |_, j| sample_normal(stream, 0.0, hyper.rho[j].sqrt()));
    let state = FactorState { z, w, phi, r, params };
    let noise = DMatrix::from_fn(n, p, |_, _| sample_normal(stream, 0.0, hyper.eta.sqrt()));
    (state.reconstruction() + noise, state)
}

/// Draws `X = (W ∘ Z) Φ + E` with `Z ~ BP-BeP(N)` truncated at `rounds`,
/// returning the data and every latent. Zero variances are allowed here.
pub fn generate_synthetic(
    params: &BPParams,
    hyper: &FactorHyper,
    n: usize,
    rounds: usize,
    stream: &mut RandomStream,
) -> Result<(DMatrix<f64>, FactorState)> {
    params.validate()?;
    check_variances(hyper)?;
    if n == 0 || rounds == 0 {
        return Err(Error::domain("synthetic data needs N >= 1 and at least one round"));
    }
    let draw = stick_break(params, rounds, stream)?;
    let z = bep_matrix(&draw, n, stream);
    Ok(assemble(*params, hyper, z, &draw, stream))
}

/// As [`generate_synthetic`] with exactly `target_k` features.
///
/// The mass is set so that the expected feature count equals `target_k`
/// (the `gamma` in `params` is ignored), then feature matrices are drawn
/// until one has the target count.
pub fn generate_synthetic_with_k(
    params: &BPParams,
    hyper: &FactorHyper,
    n: usize,
    rounds: usize,
    target_k: usize,
    stream: &mut RandomStream,
) -> Result<(DMatrix<f64>, FactorState)> {
    check_variances(hyper)?;
    if n == 0 || rounds == 0 || target_k == 0 {
        return Err(Error::domain("synthetic data needs N, rounds and target K all >= 1"));
    }
    let unit = BPParams::new(1.0, params.theta, params.alpha)?;
    let per_mass = phi_value(&unit, CurveKind::PhiN, n as f64)?.value;
    let tuned = BPParams::new(target_k as f64 / per_mass, params.theta, params.alpha)?;
    for _ in 0..10_000 {
        let draw = stick_break(&tuned, rounds, stream)?;
        let z = bep_matrix(&draw, n, stream);
        if z.n_cols() == target_k {
            return Ok(assemble(tuned, hyper, z, &draw, stream));
        }
    }
    Err(Error::numerical(format!("no feature matrix with K = {target_k} in 10000 attempts")))
}
