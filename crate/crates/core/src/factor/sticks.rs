//! Monte-Carlo integrals over stick proportions.
//!
//! A feature generated in round `i` has inclusion probability
//! `π = V_i ∏_{j<i} (1 - V_j)` with `V_j ~ Beta(1-α, θ+jα)`. Integrating
//! `π^{m1} (1-π)^{m0}` over the sticks has no closed form for `α > 0`, so
//! it is averaged over `S` simulated stick paths.

use crate::bp::BPParams;
use crate::error::{Error, Result};
use crate::stats::special::{log1m_exp, log_sum_exp};
use crate::stats::{sample_log_beta, RandomStream};

/// `S` simulated stick paths, extended one level at a time on demand.
///
/// The same paths serve every column and every candidate round within a
/// sweep, which correlates the estimates and steadies their ratios.
#[derive(Clone, Debug)]
pub struct StickBank {
    params: BPParams,
    samples: usize,
    /// `ln π` per level (outer) and path (inner).
    log_pi: Vec<Vec<f64>>,
    log_1m_pi: Vec<Vec<f64>>,
    /// Running `Σ ln(1 - V_j)` over the levels drawn so far.
    log_rest: Vec<f64>,
}

impl StickBank {
    pub fn new(params: BPParams, samples: usize) -> Result<Self> {
        params.validate()?;
        if samples == 0 {
            return Err(Error::domain("stick Monte-Carlo needs S >= 1"));
        }
        Ok(StickBank { params, samples, log_pi: Vec::new(), log_1m_pi: Vec::new(), log_rest: vec![0.0; samples] })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn levels(&self) -> usize {
        self.log_pi.len()
    }

    /// Draws sticks until round `round` is available.
    pub fn ensure(&mut self, round: usize, stream: &mut RandomStream) {
        while self.log_pi.len() < round {
            let (a, b) = self.params.stick_shapes(self.log_pi.len() + 1);
            let mut lp = Vec::with_capacity(self.samples);
            let mut l1 = Vec::with_capacity(self.samples);
            for rest in self.log_rest.iter_mut() {
                let (lv, l1mv) = sample_log_beta(stream, a, b);
                let x = lv + *rest;
                lp.push(x);
                l1.push(log1m_exp(x));
                *rest += l1mv;
            }
            self.log_pi.push(lp);
            self.log_1m_pi.push(l1);
        }
    }

    /// `ln (1/S) Σ_s π_s^{m1} (1-π_s)^{m0}` for a feature of round `round`.
    /// The round must already be drawn; see [`StickBank::ensure`].
    pub fn log_lik(&self, round: usize, m1: usize, m0: usize) -> f64 {
        let lp = &self.log_pi[round - 1];
        let l1 = &self.log_1m_pi[round - 1];
        let (m1, m0) = (m1 as f64, m0 as f64);
        let mut terms = Vec::with_capacity(self.samples);
        for s in 0..self.samples {
            let a = if m1 == 0.0 { 0.0 } else { m1 * lp[s] };
            let b = if m0 == 0.0 { 0.0 } else { m0 * l1[s] };
            terms.push(a + b);
        }
        log_sum_exp(&terms) - (self.samples as f64).ln()
    }
}

/// Monte-Carlo estimate of `E[π^{m1} (1-π)^{m0}]` for a round-`round` feature.
pub fn stick_mc_prob(
    m1: usize,
    m0: usize,
    round: usize,
    params: &BPParams,
    samples: usize,
    stream: &mut RandomStream,
) -> Result<f64> {
    if round == 0 {
        return Err(Error::domain("rounds are numbered from 1"));
    }
    let mut bank = StickBank::new(*params, samples)?;
    bank.ensure(round, stream);
    Ok(bank.log_lik(round, m1, m0).exp())
}

/// Per-column memo of `ln f(m) = ln E[π^m (1-π)^{N-m}]` for one round.
#[derive(Clone, Debug)]
pub(crate) struct ColumnMemo {
    round: usize,
    n: usize,
    cache: Vec<f64>,
}

impl ColumnMemo {
    pub(crate) fn new(round: usize, n: usize) -> Self {
        ColumnMemo { round, n, cache: vec![f64::NAN; n + 1] }
    }

    pub(crate) fn get(&mut self, bank: &StickBank, m: usize) -> f64 {
        if self.cache[m].is_nan() {
            self.cache[m] = bank.log_lik(self.round, m, self.n - m);
        }
        self.cache[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_counts_give_one() {
        let q = BPParams::new(3.0, 1.0, 0.4).unwrap();
        let mut s = RandomStream::from_seed(1);
        assert_eq!(stick_mc_prob(0, 0, 3, &q, 64, &mut s).unwrap(), 1.0);
        assert!(stick_mc_prob(1, 0, 0, &q, 64, &mut s).is_err());
        assert!(stick_mc_prob(1, 0, 1, &q, 0, &mut s).is_err());
    }

    #[test]
    fn first_round_mean_is_beta_mean() {
        let q = BPParams::new(3.0, 1.5, 0.0).unwrap();
        let mut s = RandomStream::from_seed(2);
        let v = stick_mc_prob(1, 0, 1, &q, 200_000, &mut s).unwrap();
        assert!((v - 1.0 / 2.5).abs() < 0.003, "{v}");
    }

    #[test]
    fn second_round_matches_beta_moments() {
        // E[π^2] for π = V_2 (1 - V_1): product of independent Beta moments.
        let q = BPParams::new(3.0, 1.0, 0.3).unwrap();
        let m2 = |a: f64, b: f64| a * (a + 1.0) / ((a + b) * (a + b + 1.0));
        let (a1, b1) = q.stick_shapes(1);
        let (a2, b2) = q.stick_shapes(2);
        let exact = m2(a2, b2) * m2(b1, a1);
        let mut s = RandomStream::from_seed(3);
        let v = stick_mc_prob(2, 0, 2, &q, 400_000, &mut s).unwrap();
        assert!((v / exact - 1.0).abs() < 0.02, "{v} vs {exact}");
    }

    #[test]
    fn estimator_variance_scales_as_one_over_s() {
        let q = BPParams::new(3.0, 1.0, 0.3).unwrap();
        let mut s = RandomStream::from_seed(4);
        let mut vars = Vec::new();
        for &n in &[10usize, 100, 1000] {
            let xs: Vec<f64> = (0..400).map(|_| stick_mc_prob(3, 5, 2, &q, n, &mut s).unwrap()).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            vars.push(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64);
        }
        let slope = (vars[2].ln() - vars[0].ln()) / (1000f64.ln() - 10f64.ln());
        assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn memo_matches_direct() {
        let q = BPParams::new(2.0, 1.0, 0.2).unwrap();
        let mut s = RandomStream::from_seed(5);
        let mut bank = StickBank::new(q, 32).unwrap();
        bank.ensure(4, &mut s);
        let mut memo = ColumnMemo::new(4, 10);
        assert_eq!(memo.get(&bank, 3), bank.log_lik(4, 3, 7));
        assert_eq!(memo.get(&bank, 3), bank.log_lik(4, 3, 7));
        assert_eq!(bank.levels(), 4);
    }
}
