//! The three-parameter beta process and its stick-breaking sampler.

use std::io::Write;

use crate::error::{Error, Result};
use crate::stats::special::ln_gamma;
use crate::stats::dist::sample_one_minus_beta;
use crate::stats::{sample_log_beta, sample_poisson, DistSpec, RandomStream};

/// Hyperparameters `(γ, θ, α)`: mass, concentration and discount.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BPParams {
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
}

impl BPParams {
    /// Builds and validates a parameter triple.
    pub fn new(gamma: f64, theta: f64, alpha: f64) -> Result<Self> {
        let p = BPParams { gamma, theta, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let BPParams { gamma, theta, alpha } = *self;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Parameter(format!("mass gamma must be positive and finite, got {gamma}")));
        }
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::Parameter(format!("discount alpha must lie in [0, 1), got {alpha}")));
        }
        if !theta.is_finite() || theta <= -alpha {
            return Err(Error::Parameter(format!(
                "concentration theta must exceed -alpha = {}, got {theta}",
                -alpha
            )));
        }
        if alpha == 0.0 && theta <= 0.0 {
            return Err(Error::Parameter(format!("theta must be positive when alpha = 0, got {theta}")));
        }
        Ok(())
    }

    /// Shapes of the stick proportion at break level `l` (1-based):
    /// `Beta(1 - α, θ + lα)`.
    #[inline]
    pub fn stick_shapes(&self, level: usize) -> (f64, f64) {
        (1.0 - self.alpha, self.theta + level as f64 * self.alpha)
    }

    pub fn stick_spec(&self, level: usize) -> DistSpec {
        let (a, b) = self.stick_shapes(level);
        DistSpec::Beta { a, b }
    }

    /// Log of the normalising constant `Γ(1+θ) / (Γ(1-α) Γ(θ+α))`.
    pub fn log_levy_norm(&self) -> f64 {
        ln_gamma(1.0 + self.theta) - ln_gamma(1.0 - self.alpha) - ln_gamma(self.theta + self.alpha)
    }
}

/// Lévy density of the beta process per unit of base mass, excluding `γ`.
pub fn levy_density(u: f64, params: &BPParams) -> Result<f64> {
    params.validate()?;
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("levy_density needs u in (0, 1), got {u}")));
    }
    Ok(log_levy_density_unchecked(u, params).exp())
}

#[inline]
pub(crate) fn log_levy_density_unchecked(u: f64, p: &BPParams) -> f64 {
    p.log_levy_norm() - (1.0 + p.alpha) * u.ln() + (p.theta + p.alpha - 1.0) * (-u).ln_1p()
}

/// A finite truncation of a beta-process draw, atoms in generation order.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaProcessDraw {
    /// Atom weights, strictly inside (0, 1).
    pub weights: Vec<f64>,
    /// Natural logs of the unclamped weights. Deep-round atoms can fall below
    /// the smallest positive double, in which case `weights` holds that
    /// floor while this stays exact.
    pub log_weights: Vec<f64>,
    /// 1-based stick-breaking round of each atom, nondecreasing.
    pub rounds: Vec<u32>,
    pub atom_labels: Vec<f64>,
    pub truncation_rounds: usize,
}

/// The stick proportions behind each atom, `V^(1) .. V^(i)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StickTrace {
    pub sticks: Vec<Vec<f64>>,
}

impl StickTrace {
    /// Rebuilds an atom's weight as `V^(i) ∏_{l<i} (1 - V^(l))`.
    pub fn reconstruct(&self, atom: usize) -> f64 {
        let s = &self.sticks[atom];
        let (last, rest) = s.split_last().expect("every atom has at least one stick");
        rest.iter().fold(*last, |acc, v| acc * (1.0 - v))
    }
}

impl BetaProcessDraw {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ weights`, the realised total mass `B(Ψ)` of the truncation.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weights sorted in decreasing order.
    pub fn ranked_weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        w.sort_by(|a, b| b.total_cmp(a));
        w
    }

    /// Pools several independent draws into one.
    ///
    /// Poisson round counts add, so the result is itself a draw with mass
    /// `k γ` and the same `(θ, α)`. Atoms are merged stably by round.
    pub fn superpose(draws: &[BetaProcessDraw]) -> Result<BetaProcessDraw> {
        let first = draws.first().ok_or_else(|| Error::domain("superpose needs at least one draw"))?;
        let r = first.truncation_rounds;
        if draws.iter().any(|d| d.truncation_rounds != r) {
            return Err(Error::domain("superposed draws must share a truncation level"));
        }
        let mut idx: Vec<(u32, usize, usize)> = draws
            .iter()
            .enumerate()
            .flat_map(|(d, draw)| draw.rounds.iter().enumerate().map(move |(a, &rd)| (rd, d, a)))
            .collect();
        idx.sort_by_key(|&(rd, d, a)| (rd, d, a));
        let mut out = BetaProcessDraw {
            weights: Vec::with_capacity(idx.len()),
            log_weights: Vec::with_capacity(idx.len()),
            rounds: Vec::with_capacity(idx.len()),
            atom_labels: Vec::with_capacity(idx.len()),
            truncation_rounds: r,
        };
        for (rd, d, a) in idx {
            out.weights.push(draws[d].weights[a]);
            out.log_weights.push(draws[d].log_weights[a]);
            out.rounds.push(rd);
            out.atom_labels.push(draws[d].atom_labels[a]);
        }
        Ok(out)
    }

    /// Writes `round,weight,atom_label` rows under a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "round,weight,atom_label")?;
        for i in 0..self.len() {
            writeln!(w, "{},{:e},{}", self.rounds[i], self.weights[i], self.atom_labels[i])?;
        }
        Ok(())
    }
}

/// Runs `rounds` rounds of stick-breaking.
pub fn stick_break(params: &BPParams, rounds: usize, stream: &mut RandomStream) -> Result<BetaProcessDraw> {
    Ok(stick_break_impl(params, rounds, stream, false)?.0)
}

/// As [`stick_break`], also returning every stick proportion.
pub fn stick_break_traced(
    params: &BPParams,
    rounds: usize,
    stream: &mut RandomStream,
) -> Result<(BetaProcessDraw, StickTrace)> {
    let (d, t) = stick_break_impl(params, rounds, stream, true)?;
    Ok((d, t.unwrap_or_default()))
}

fn stick_break_impl(
    params: &BPParams,
    rounds: usize,
    stream: &mut RandomStream,
    keep_trace: bool,
) -> Result<(BetaProcessDraw, Option<StickTrace>)> {
    params.validate()?;
    if rounds == 0 {
        return Err(Error::domain("stick_break needs at least one round"));
    }
    let shapes: Vec<(f64, f64)> = (1..=rounds).map(|l| params.stick_shapes(l)).collect();
    let mut draw = BetaProcessDraw {
        weights: Vec::new(),
        log_weights: Vec::new(),
        rounds: Vec::new(),
        atom_labels: Vec::new(),
        truncation_rounds: rounds,
    };
    let mut trace = keep_trace.then(StickTrace::default);
    for i in 1..=rounds {
        let c = sample_poisson(stream, params.gamma);
        for _ in 0..c {
            let mut sticks = trace.as_ref().map(|_| Vec::with_capacity(i));
            let log_rest = if let Some(s) = sticks.as_mut() {
                let mut acc = 0.0;
                for &(a, b) in &shapes[..i - 1] {
                    let (lv, l1mv) = sample_log_beta(stream, a, b);
                    acc += l1mv;
                    s.push(lv.exp());
                }
                acc
            } else if params.alpha == 0.0 {
                // Beta(1, θ) complements are U^{1/θ}, so the whole product is
                // one power of a product of uniforms.
                let mut acc = ProductAccumulator::default();
                for _ in 1..i {
                    acc.mul(stream.uniform());
                }
                acc.ln() / params.theta
            } else {
                let mut acc = ProductAccumulator::default();
                for &(a, b) in &shapes[..i - 1] {
                    acc.mul(sample_one_minus_beta(stream, a, b));
                }
                acc.ln()
            };
            let (a, b) = shapes[i - 1];
            let (lv, _) = sample_log_beta(stream, a, b);
            if let Some(s) = sticks.as_mut() {
                s.push(lv.exp());
            }
            let lw = lv + log_rest;
            draw.weights.push(lw.exp().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0));
            draw.log_weights.push(lw);
            draw.rounds.push(i as u32);
            draw.atom_labels.push(stream.uniform());
            if let (Some(t), Some(s)) = (trace.as_mut(), sticks) {
                t.sticks.push(s);
            }
        }
    }
    Ok((draw, trace))
}

/// Running product of factors in (0, 1], rescaled before it underflows.
#[derive(Default)]
struct ProductAccumulator {
    log_scale: f64,
    value: Option<f64>,
}

impl ProductAccumulator {
    #[inline]
    fn mul(&mut self, x: f64) {
        let v = self.value.unwrap_or(1.0) * x;
        if v < 1e-280 {
            self.log_scale += v.ln();
            self.value = Some(1.0);
        } else {
            self.value = Some(v);
        }
    }

    fn ln(&self) -> f64 {
        self.log_scale + self.value.unwrap_or(1.0).ln()
    }
}

/// Repeated size-biased selection from one draw.
#[derive(Clone, Debug)]
pub struct SizeBiasedSampler<'a> {
    draw: &'a BetaProcessDraw,
    cumulative: Vec<f64>,
}

impl<'a> SizeBiasedSampler<'a> {
    pub fn new(draw: &'a BetaProcessDraw) -> Result<Self> {
        if draw.is_empty() {
            return Err(Error::domain("size-biased pick from an empty draw"));
        }
        let mut acc = 0.0;
        let cumulative = draw
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(SizeBiasedSampler { draw, cumulative })
    }

    /// Index of an atom chosen with probability proportional to its weight.
    pub fn pick_index(&self, stream: &mut RandomStream) -> usize {
        let total = *self.cumulative.last().unwrap();
        let target = stream.uniform() * total;
        self.cumulative.partition_point(|&c| c <= target).min(self.cumulative.len() - 1)
    }

    pub fn pick(&self, stream: &mut RandomStream) -> f64 {
        self.draw.weights[self.pick_index(stream)]
    }
}

/// A single weight chosen with probability proportional to its value.
pub fn size_biased_pick(draw: &BetaProcessDraw, stream: &mut RandomStream) -> Result<f64> {
    Ok(SizeBiasedSampler::new(draw)?.pick(stream))
}

/// Monte-Carlo estimate of `γ - E[Σ weights]` after `rounds` rounds.
pub fn residual_mass_estimate(
    params: &BPParams,
    rounds: usize,
    replicates: usize,
    stream: &mut RandomStream,
) -> Result<f64> {
    params.validate()?;
    if replicates == 0 {
        return Err(Error::domain("residual_mass_estimate needs at least one replicate"));
    }
    let mut total = 0.0;
    for _ in 0..replicates {
        total += stick_break(params, rounds, stream)?.total_mass();
    }
    Ok(params.gamma - total / replicates as f64)
}
