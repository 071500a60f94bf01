//! Gibbs conditionals and the sweep driver.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::sticks::{ColumnMemo, StickBank};
use super::trace::{Trace, TraceRecord};
use super::{FactorHyper, FactorState, MCMCConfig};
use crate::bep::FeatureMatrix;
use crate::bp::BPParams;
use crate::error::{Error, Result};
use crate::stats::special::ln_gamma;
use crate::stats::{sample_gamma, sample_normal, RandomStream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::numerical(format!("{what} is not numerically positive definite")))
}

/// Log density of `N(x | 0, ηI + ζ ΦᵀΦ)` from `‖x‖²`, `y = Φx` and the
/// Gram matrix `G = ΦΦᵀ` of the active factor rows.
fn woodbury_loglik(xx: f64, y: &DVector<f64>, g: DMatrix<f64>, p: usize, eta: f64, zeta: f64) -> Result<f64> {
    let k = y.len();
    let mut quad = xx / eta;
    let mut log_det = p as f64 * eta.ln();
    if k > 0 {
        let mut m = g / eta;
        for i in 0..k {
            m[(i, i)] += 1.0 / zeta;
        }
        let chol = cholesky(m, "collapsed likelihood inner system")?;
        let sol = chol.solve(y);
        quad -= y.dot(&sol) / (eta * eta);
        log_det += k as f64 * zeta.ln() + 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    }
    Ok(-0.5 * (p as f64 * LN_2PI + log_det + quad))
}

/// `ln N(x | 0, ηI + ζ Φ_Iᵀ Φ_I)` for one data row, where `phi_i` holds the
/// active factor rows (|I|×P). Works through the |I|×|I| system.
pub fn collapsed_row_loglik(x_row: &[f64], phi_i: &DMatrix<f64>, eta: f64, zeta: f64) -> Result<f64> {
    if !(eta > 0.0 && zeta > 0.0) {
        return Err(Error::domain("eta and zeta must be positive"));
    }
    let p = x_row.len();
    if phi_i.nrows() > 0 && phi_i.ncols() != p {
        return Err(Error::domain("factor rows and data row differ in length"));
    }
    let x = DVector::from_column_slice(x_row);
    let y = if phi_i.nrows() == 0 { DVector::zeros(0) } else { phi_i * &x };
    let g = phi_i * phi_i.transpose();
    woodbury_loglik(x.norm_squared(), &y, g, p, eta, zeta)
}

/// Precomputed pieces for the collapsed likelihood over one Z sweep.
struct RowLik<'a> {
    gram: DMatrix<f64>,
    y: DMatrix<f64>,
    xx: Vec<f64>,
    p: usize,
    hyper: &'a FactorHyper,
}

impl<'a> RowLik<'a> {
    fn new(phi: &DMatrix<f64>, x: &DMatrix<f64>, hyper: &'a FactorHyper) -> Self {
        RowLik {
            gram: phi * phi.transpose(),
            // K×N: column n is Φ x_n.
            y: phi * x.transpose(),
            xx: x.row_iter().map(|r| r.norm_squared()).collect(),
            p: x.ncols(),
            hyper,
        }
    }

    fn eval(&self, row: usize, active: &[usize]) -> Result<f64> {
        let k = active.len();
        let y = DVector::from_fn(k, |i, _| self.y[(active[i], row)]);
        let g = DMatrix::from_fn(k, k, |i, j| self.gram[(active[i], active[j])]);
        woodbury_loglik(self.xx[row], &y, g, self.p, self.hyper.eta, self.hyper.zeta)
    }
}

/// One pass over every `Z_{n,k}` without removing emptied columns.
///
/// Each entry is drawn from its conditional with `W` integrated out: the
/// collapsed row likelihood times the stick-integrated prior odds
/// `f(m'+1) / f(m')`, where `f(m) = E[π^m (1-π)^{N-m}]` for the column's round.
pub fn sample_z_fixed(
    state: &mut FactorState,
    x: &DMatrix<f64>,
    hyper: &FactorHyper,
    bank: &mut StickBank,
    stream: &mut RandomStream,
) -> Result<()> {
    let (n, k) = (state.n(), state.k());
    if k == 0 {
        return Ok(());
    }
    let max_round = *state.r.iter().max().unwrap() as usize;
    bank.ensure(max_round, stream);
    let lik = RowLik::new(&state.phi, x, hyper);
    let mut memos: Vec<ColumnMemo> = state.r.iter().map(|&r| ColumnMemo::new(r as usize, n)).collect();
    for row in 0..n {
        let mut active: Vec<usize> = (0..k).filter(|&c| state.z.get(row, c)).collect();
        let mut current = lik.eval(row, &active)?;
        for col in 0..k {
            let on = state.z.get(row, col);
            let others = state.z.column_counts()[col] - on as usize;
            let prior_odds = memos[col].get(bank, others + 1) - memos[col].get(bank, others);
            let alt_active: Vec<usize> = if on {
                active.iter().copied().filter(|&c| c != col).collect()
            } else {
                let mut a = active.clone();
                let pos = a.partition_point(|&c| c < col);
                a.insert(pos, col);
                a
            };
            let alt = lik.eval(row, &alt_active)?;
            let (ll_in, ll_out) = if on { (current, alt) } else { (alt, current) };
            let log_odds = ll_in - ll_out + prior_odds;
            let p_on = if log_odds >= 0.0 { 1.0 / (1.0 + (-log_odds).exp()) } else {
                let e = log_odds.exp();
                e / (1.0 + e)
            };
            let new = stream.uniform() < p_on;
            if new != on {
                state.z.set(row, col, new);
                active = alt_active;
                current = alt;
            }
        }
    }
    Ok(())
}

/// Log-odds of `Z_{row,col} = 1` against `0` under the same conditional
/// [`sample_z_fixed`] draws from, with every other entry held fixed.
pub fn z_log_odds(
    state: &FactorState,
    x: &DMatrix<f64>,
    hyper: &FactorHyper,
    bank: &mut StickBank,
    stream: &mut RandomStream,
    row: usize,
    col: usize,
) -> Result<f64> {
    let r = state.r[col] as usize;
    bank.ensure(r, stream);
    let lik = RowLik::new(&state.phi, x, hyper);
    let active_out: Vec<usize> = (0..state.k()).filter(|&c| c != col && state.z.get(row, c)).collect();
    let mut active_in = active_out.clone();
    active_in.insert(active_in.partition_point(|&c| c < col), col);
    let others = state.z.column_counts()[col] - state.z.get(row, col) as usize;
    let n = state.n();
    let prior = bank.log_lik(r, others + 1, n - others - 1) - bank.log_lik(r, others, n - others);
    Ok(lik.eval(row, &active_in)? - lik.eval(row, &active_out)? + prior)
}

/// [`sample_z_fixed`] followed by removal of columns no row uses.
pub fn sample_z(
    state: &mut FactorState,
    x: &DMatrix<f64>,
    hyper: &FactorHyper,
    bank: &mut StickBank,
    stream: &mut RandomStream,
) -> Result<usize> {
    sample_z_fixed(state, x, hyper, bank, stream)?;
    Ok(state.prune())
}

fn poisson_log_pmf(i: u64, gamma: f64) -> f64 {
    -gamma + i as f64 * gamma.ln() - ln_gamma(i as f64 + 1.0)
}

/// `1 - Σ_{i=1}^{m} Pois(i | γ)`, summed from the tail to avoid cancellation.
fn round_tail(m: u64, gamma: f64) -> f64 {
    let mut upper = 0.0;
    let mut i = m + 1;
    loop {
        let t = poisson_log_pmf(i, gamma).exp();
        upper += t;
        if (i as f64 > gamma && t < 1e-18 * upper) || t == 0.0 && i as f64 > gamma {
            break;
        }
        i += 1;
    }
    (-gamma).exp() + upper
}

/// Prior probability that a column lands in round `r`, given the previous
/// column's round and how many columns already share it (`None` for the
/// first column).
///
/// Staying in the previous round has probability
/// `(1 - Σ_{i=1}^{R} Pois(i)) / (1 - Σ_{i=1}^{R-1} Pois(i))`; moving `h`
/// rounds ahead takes the rest times `(1 - Pois(0)) Pois(0)^{h-1}`.
pub fn round_prior(gamma: f64, previous: Option<(u32, usize)>, r: u32) -> f64 {
    log_round_prior(gamma, previous, r).exp()
}

fn log_round_prior(gamma: f64, previous: Option<(u32, usize)>, r: u32) -> f64 {
    let log_p0 = -gamma;
    let log_1m_p0 = (-(-gamma).exp()).ln_1p();
    match previous {
        None => {
            if r == 0 {
                f64::NEG_INFINITY
            } else {
                log_1m_p0 + (r - 1) as f64 * log_p0
            }
        }
        Some((prev, shared)) => {
            let stay = stay_probability(gamma, shared);
            if r < prev {
                f64::NEG_INFINITY
            } else if r == prev {
                stay.ln()
            } else {
                (-stay).ln_1p() + log_1m_p0 + (r - prev - 1) as f64 * log_p0
            }
        }
    }
}

fn stay_probability(gamma: f64, shared: usize) -> f64 {
    let num = round_tail(shared as u64, gamma);
    let den = if shared == 0 { 1.0 } else { round_tail(shared as u64 - 1, gamma) };
    let s = num / den;
    if s.is_finite() {
        s.clamp(0.0, 1.0)
    } else {
        log::warn!("round prior underflow with {shared} columns in the previous round; moving on");
        0.0
    }
}

fn sample_log_weights(logw: &[f64], stream: &mut RandomStream) -> Option<usize> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = stream.uniform() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return Some(i);
        }
        u -= x;
    }
    w.iter().rposition(|&x| x > 0.0)
}

/// Resamples every round indicator in column order, each conditioned on
/// the rounds before it. Candidate rounds run upward from the previous
/// column's round until their mass falls below the tail threshold.
pub fn sample_round_indicators(
    state: &mut FactorState,
    config: &MCMCConfig,
    bank: &mut StickBank,
    stream: &mut RandomStream,
) -> Result<()> {
    let n = state.n();
    let gamma = state.params.gamma;
    let log_thr = config.round_tail_threshold.ln();
    for k in 0..state.k() {
        let m1 = state.z.column_counts()[k];
        let previous = (k > 0).then(|| {
            let prev = state.r[k - 1];
            (prev, state.r[..k].iter().filter(|&&r| r == prev).count())
        });
        let start = previous.map_or(1, |(p, _)| p);
        let mut logw: Vec<f64> = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for r in start..start.saturating_add(config.max_rounds as u32) {
            bank.ensure(r as usize, stream);
            let lw = log_round_prior(gamma, previous, r) + bank.log_lik(r as usize, m1, n - m1);
            best = best.max(lw);
            logw.push(lw);
            // Past the first candidate the prior decays geometrically.
            if r > start && lw < best + log_thr {
                break;
            }
        }
        match sample_log_weights(&logw, stream) {
            Some(i) => state.r[k] = start + i as u32,
            None => {
                log::warn!("round indicator {k}: all candidate masses underflowed; keeping r = {}", state.r[k]);
                state.r[k] = state.r[k].max(start);
            }
        }
    }
    Ok(())
}

/// `γ ~ Gamma(Σ_i C_i, r_K)`, the posterior under the improper `Ga(0, 0)`
/// prior, where the round lengths `C_i` are recovered from the indicators.
pub fn sample_gamma_mass(state: &mut FactorState, stream: &mut RandomStream) -> Result<f64> {
    let r_k = match state.r.last() {
        Some(&r) if r > 0 => r,
        _ => return Err(Error::domain("mass update needs at least one round indicator")),
    };
    let mut lengths = vec![0usize; r_k as usize];
    for &r in &state.r {
        lengths[r as usize - 1] += 1;
    }
    let shape = lengths.iter().sum::<usize>() as f64;
    let g = sample_gamma(stream, shape) / r_k as f64;
    state.params.gamma = g.max(f64::MIN_POSITIVE);
    Ok(state.params.gamma)
}

/// `Σ_k ln E[π_k^{m1} (1-π_k)^{m0}]` under `params`, with stick paths seeded
/// from `seed` so every grid point sees the same random numbers.
fn columns_loglik(state: &FactorState, params: BPParams, sticks: usize, seed: u64) -> Result<f64> {
    if state.k() == 0 {
        return Ok(0.0);
    }
    let mut bank = StickBank::new(params, sticks)?;
    let mut s = RandomStream::from_seed(seed);
    bank.ensure(*state.r.iter().max().unwrap() as usize, &mut s);
    let n = state.n();
    Ok(state.r.iter().zip(state.z.column_counts()).map(|(&r, &m1)| bank.log_lik(r as usize, m1, n - m1)).sum())
}

fn sample_on_grid(
    state: &FactorState,
    grid: &[f64],
    config: &MCMCConfig,
    params_at: impl Fn(f64) -> BPParams,
    stream: &mut RandomStream,
) -> Result<Option<f64>> {
    let seed = rand::RngCore::next_u64(stream);
    let logw = grid
        .iter()
        .map(|&v| columns_loglik(state, params_at(v), config.sticks, seed))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_log_weights(&logw, stream).map(|i| grid[i]))
}

/// The θ grid: `theta_grid_points` values spaced around the current θ,
/// restricted to `(0, θ_max]`.
pub fn theta_grid(theta: f64, config: &MCMCConfig) -> Vec<f64> {
    let step = (config.delta_theta * theta).max(config.delta_theta_min);
    let half = (config.theta_grid_points / 2) as i64;
    (-half..=half)
        .map(|t| theta + t as f64 * step)
        .filter(|&v| v > 0.0 && v <= config.theta_max)
        .collect()
}

/// The α lattice `Δα/2 + tΔα`, `t = 0, .., 1/Δα - 1`.
pub fn alpha_grid(config: &MCMCConfig) -> Vec<f64> {
    let cells = (1.0 / config.delta_alpha).round() as usize;
    (0..cells).map(|t| config.delta_alpha * (0.5 + t as f64)).collect()
}

/// Draws θ from its discretised conditional under a flat prior.
pub fn sample_theta(state: &mut FactorState, config: &MCMCConfig, stream: &mut RandomStream) -> Result<f64> {
    let p = state.params;
    let grid = theta_grid(p.theta, config);
    match sample_on_grid(state, &grid, config, |t| BPParams { theta: t, ..p }, stream)? {
        Some(t) => state.params.theta = t,
        None => log::warn!("theta update: every grid mass underflowed; keeping {}", p.theta),
    }
    Ok(state.params.theta)
}

/// Draws α from its discretised conditional under a flat prior.
pub fn sample_alpha(state: &mut FactorState, config: &MCMCConfig, stream: &mut RandomStream) -> Result<f64> {
    let p = state.params;
    let grid: Vec<f64> = alpha_grid(config).into_iter().filter(|&a| p.theta > -a).collect();
    match sample_on_grid(state, &grid, config, |a| BPParams { alpha: a, ..p }, stream)? {
        Some(a) => state.params.alpha = a,
        None => log::warn!("alpha update: every grid mass underflowed; keeping {}", p.alpha),
    }
    Ok(state.params.alpha)
}

/// Mean and covariance of `N(μ, Σ)` for one column of Φ given the masked
/// weights `a = W ∘ Z` and data column `x`.
pub fn phi_posterior(a: &DMatrix<f64>, x: &DVector<f64>, eta: f64, rho: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = a.ncols();
    let prec = a.transpose() * a / eta + DMatrix::identity(k, k) / rho;
    let chol = cholesky(prec, "factor posterior precision")?;
    let mean = chol.solve(&(a.transpose() * x / eta));
    Ok((mean, chol.inverse()))
}

/// Mean and covariance of the active weights of one row given its factor
/// rows `phi_i` (|I|×P) and data row `x`.
pub fn w_posterior(phi_i: &DMatrix<f64>, x: &DVector<f64>, eta: f64, zeta: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = phi_i.nrows();
    let prec = phi_i * phi_i.transpose() / eta + DMatrix::identity(k, k) / zeta;
    let chol = cholesky(prec, "weight posterior precision")?;
    let mean = chol.solve(&(phi_i * x / eta));
    Ok((mean, chol.inverse()))
}

/// `μ + L^{-T} ε` for precision `L Lᵀ`, the standard draw from `N(μ, Λ^{-1})`.
fn draw_from_precision(chol: &Cholesky<f64, Dyn>, mean: &DVector<f64>, stream: &mut RandomStream) -> Result<DVector<f64>> {
    let eps = DVector::from_fn(mean.len(), |_, _| sample_normal(stream, 0.0, 1.0));
    let lt = chol.l().transpose();
    let v = lt.solve_upper_triangular(&eps).ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    Ok(mean + v)
}

/// Resamples each column of Φ from its Gaussian conditional.
pub fn sample_phi(state: &mut FactorState, x: &DMatrix<f64>, hyper: &FactorHyper, stream: &mut RandomStream) -> Result<()> {
    let k = state.k();
    if k == 0 {
        return Ok(());
    }
    let a = state.masked_weights();
    let ata = a.transpose() * &a / hyper.eta;
    let atx = a.transpose() * x / hyper.eta;
    for (p, &rho) in hyper.rho.iter().enumerate() {
        let mut prec = ata.clone();
        for i in 0..k {
            prec[(i, i)] += 1.0 / rho;
        }
        let chol = cholesky(prec, "factor posterior precision")?;
        let mean = chol.solve(&atx.column(p).into_owned());
        let draw = draw_from_precision(&chol, &mean, stream)?;
        state.phi.set_column(p, &draw);
    }
    Ok(())
}

/// Resamples the active weights of every row; inactive entries are left alone.
pub fn sample_w(state: &mut FactorState, x: &DMatrix<f64>, hyper: &FactorHyper, stream: &mut RandomStream) -> Result<()> {
    let k = state.k();
    if k == 0 {
        return Ok(());
    }
    let gram = &state.phi * state.phi.transpose();
    let y = &state.phi * x.transpose();
    for n in 0..state.n() {
        let active: Vec<usize> = (0..k).filter(|&c| state.z.get(n, c)).collect();
        if active.is_empty() {
            continue;
        }
        let m = active.len();
        let mut prec = DMatrix::from_fn(m, m, |i, j| gram[(active[i], active[j])] / hyper.eta);
        for i in 0..m {
            prec[(i, i)] += 1.0 / hyper.zeta;
        }
        let b = DVector::from_fn(m, |i, _| y[(active[i], n)] / hyper.eta);
        let chol = cholesky(prec, "weight posterior precision")?;
        let mean = chol.solve(&b);
        let draw = draw_from_precision(&chol, &mean, stream)?;
        for (i, &c) in active.iter().enumerate() {
            state.w[(n, c)] = draw[i];
        }
    }
    Ok(())
}

/// Starting state: `k_init` columns with independent `Bernoulli(init_z_prob)`
/// entries (unused columns dropped), rounds filled round-major at about
/// `γ` columns per round, and `W`, `Φ` from their priors.
pub fn initial_state(
    x: &DMatrix<f64>,
    config: &MCMCConfig,
    hyper: &FactorHyper,
    stream: &mut RandomStream,
) -> Result<FactorState> {
    config.validate()?;
    hyper.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    if p != hyper.p() {
        return Err(Error::domain(format!("data has {p} columns but rho has {} entries", hyper.p())));
    }
    let params = BPParams::new(config.gamma_init, config.theta_init, config.alpha_init)?;
    let k = config.k_init;
    let rows: Vec<Vec<u8>> =
        (0..n).map(|_| (0..k).map(|_| (stream.uniform() < config.init_z_prob) as u8).collect()).collect();
    let z = if k == 0 { FeatureMatrix::empty(n) } else { FeatureMatrix::from_rows(&rows)? };
    let per_round = params.gamma.round().max(1.0) as usize;
    let r = (0..k).map(|c| 1 + (c / per_round) as u32).collect();
    let w = DMatrix::from_fn(n, k, |_, _| sample_normal(stream, 0.0, hyper.zeta.sqrt()));
    let phi = DMatrix::from_fn(k, p, |_, j| sample_normal(stream, 0.0, hyper.rho[j].sqrt()));
    let mut state = FactorState { z, w, phi, r, params };
    state.prune();
    Ok(state)
}

fn record(iteration: usize, state: &FactorState, x: &DMatrix<f64>, hyper: &FactorHyper) -> TraceRecord {
    TraceRecord {
        iteration,
        k: state.k(),
        theta: state.params.theta,
        alpha: state.params.alpha,
        gamma: state.params.gamma,
        rmse: state.rmse(x),
        log_lik: state.data_loglik(x, hyper.eta),
    }
}

/// Runs the sampler from `init`. Each sweep updates, in order, the round
/// indicators, `Z` (with `W` integrated out), `W`, `γ`, `θ`, `α` and `Φ`.
pub fn run_mcmc(
    x: &DMatrix<f64>,
    config: &MCMCConfig,
    hyper: &FactorHyper,
    init: FactorState,
) -> Result<(Trace, FactorState)> {
    config.validate()?;
    hyper.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("data contains non-finite values"));
    }
    if x.ncols() != hyper.p() || x.nrows() != init.n() {
        return Err(Error::domain("data shape does not match the initial state"));
    }
    let mut state = init;
    let mut stream = RandomStream::new(config.seed, 1);
    let mut trace = Trace::new(config.thin);
    trace.records.push(record(0, &state, x, hyper));
    for it in 1..=config.iterations {
        sweep(&mut state, x, config, hyper, &mut stream).map_err(|e| {
            log::error!("iteration {it}: {e}");
            e
        })?;
        if it % config.thin == 0 {
            trace.records.push(record(it, &state, x, hyper));
        }
        log::debug!("iteration {it}: K = {}, theta = {:.3}, alpha = {:.3}", state.k(), state.params.theta, state.params.alpha);
    }
    Ok((trace, state))
}

fn sweep(
    state: &mut FactorState,
    x: &DMatrix<f64>,
    config: &MCMCConfig,
    hyper: &FactorHyper,
    stream: &mut RandomStream,
) -> Result<()> {
    let mut bank = StickBank::new(state.params, config.sticks)?;
    sample_round_indicators(state, config, &mut bank, stream)?;
    sample_z(state, x, hyper, &mut bank, stream)?;
    sample_w(state, x, hyper, stream)?;
    if state.k() > 0 {
        sample_gamma_mass(state, stream)?;
    }
    sample_theta(state, config, stream)?;
    sample_alpha(state, config, stream)?;
    sample_phi(state, x, hyper, stream)?;
    Ok(())
}
