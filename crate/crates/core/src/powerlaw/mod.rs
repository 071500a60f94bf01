//! Mean feature-count curves, their power-law asymptotics, the tail bound
//! on per-row feature counts, and log-log slope fitting.

pub mod quadrature;

use std::fmt;
use std::io::Write;

use crate::bp::BPParams;
use crate::error::{Error, Result};
use crate::stats::special::{ln_gamma, log1m_exp, log_binomial};
use quadrature::{integrate_pieces, Piece, QuadOptions, QuadResult};

/// Which mean count a curve holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    /// `Φ_N`, expected features among `N` draws.
    PhiN,
    /// `Φ(t)`, the Poissonized version at time `t`.
    PhiT,
    /// `Φ_{N,j}`, expected features present in exactly `j` of `N` draws.
    PhiNj(u32),
    /// `Φ_j(t)`.
    PhiTj(u32),
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveKind::PhiN => write!(f, "PhiN"),
            CurveKind::PhiT => write!(f, "PhiT"),
            CurveKind::PhiNj(j) => write!(f, "PhiNj{j}"),
            CurveKind::PhiTj(j) => write!(f, "PhiTj{j}"),
        }
    }
}

/// `K ~ c x^a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticLaw {
    pub c: f64,
    pub a: f64,
}

impl AsymptoticLaw {
    pub fn new(c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(a > 0.0 && a < 1.0) {
            return Err(Error::domain(format!("power law needs c > 0 and a in (0, 1), got c = {c}, a = {a}")));
        }
        Ok(AsymptoticLaw { c, a })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c * x.powf(self.a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanCurve {
    pub kind: CurveKind,
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    /// Quadrature error estimate for each value.
    pub abs_errors: Vec<f64>,
}

impl MeanCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,{},abs_error", self.kind)?;
        for i in 0..self.values.len() {
            writeln!(w, "{},{:e},{:e}", self.abscissae[i], self.values[i], self.abs_errors[i])?;
        }
        Ok(())
    }
}

/// Integrand of a mean count, as a log-value in terms of `ln u`, `ln(1-u)`
/// and `u`, together with its power-law exponents at `u = 0` and `u = 1`.
struct Integrand<'a> {
    log_f: Box<dyn Fn(f64, f64, f64) -> f64 + 'a>,
    p0: f64,
    p1: f64,
}

/// Exponents in `(-1, 1)` other than zero get a power substitution; larger
/// ones are smooth enough for plain refinement.
fn needs_substitution(p: f64) -> bool {
    p > -1.0 && p < 1.0 && p != 0.0
}

fn integrand<'a>(params: &BPParams, kind: CurveKind, x: f64) -> Result<Option<Integrand<'a>>> {
    let BPParams { gamma, theta, alpha } = *params;
    let log_norm = gamma.ln() + params.log_levy_norm();
    let base = move |lu: f64, lv: f64| log_norm - (1.0 + alpha) * lu + (theta + alpha - 1.0) * lv;
    let edge = theta + alpha - 1.0;
    Ok(Some(match kind {
        CurveKind::PhiN => {
            let ln_n = x.ln();
            Integrand {
                log_f: Box::new(move |lu, lv, u| {
                    // ln(1 - (1-u)^N), switching to its small-u expansion.
                    let tail = if ln_n + lu < -23.0 { ln_n + lu - 0.5 * (x - 1.0) * u } else { log1m_exp(x * lv) };
                    base(lu, lv) + tail
                }),
                p0: -alpha,
                p1: edge,
            }
        }
        CurveKind::PhiT => {
            let ln_t = x.ln();
            Integrand {
                log_f: Box::new(move |lu, lv, u| {
                    let tail = if ln_t + lu < -23.0 { ln_t + lu - 0.5 * x * u } else { (-(-x * u).exp_m1()).ln() };
                    base(lu, lv) + tail
                }),
                p0: -alpha,
                p1: edge,
            }
        }
        CurveKind::PhiNj(j) => {
            if j == 0 {
                return Err(Error::domain("PhiNj needs j >= 1"));
            }
            if x.fract() != 0.0 {
                return Err(Error::domain(format!("PhiNj needs an integer N, got {x}")));
            }
            let n = x as u64;
            let j64 = j as u64;
            if j64 > n {
                return Ok(None);
            }
            let lc = log_binomial(n, j64);
            let (jf, rest) = (j as f64, (n - j64) as f64);
            Integrand {
                log_f: Box::new(move |lu, lv, _| base(lu, lv) + lc + jf * lu + rest * lv),
                p0: jf - 1.0 - alpha,
                p1: edge + rest,
            }
        }
        CurveKind::PhiTj(j) => {
            if j == 0 {
                return Err(Error::domain("PhiTj needs j >= 1"));
            }
            let jf = j as f64;
            let lead = jf * x.ln() - ln_gamma(jf + 1.0);
            Integrand {
                log_f: Box::new(move |lu, lv, u| base(lu, lv) + lead + jf * lu - x * u),
                p0: jf - 1.0 - alpha,
                p1: edge,
            }
        }
    }))
}

/// Splits (0, 1) into dyadic pieces toward both ends and maps the two
/// innermost end pieces so that algebraic endpoint behaviour becomes smooth.
fn pieces<'a>(ig: &'a Integrand<'a>, scale: f64) -> Vec<Piece<'a>> {
    let depth = ((scale.max(1.0).log2().ceil() as i32) + 4).clamp(2, 60);
    let mut out: Vec<Piece<'a>> = Vec::new();
    let lf = &ig.log_f;
    for k in 1..depth {
        let (a, b) = (0.5f64.powi(k + 1), 0.5f64.powi(k));
        out.push(Piece { a, b, f: Box::new(move |u: f64| lf(u.ln(), (-u).ln_1p(), u).exp()) });
        out.push(Piece {
            a,
            b,
            f: Box::new(move |v: f64| {
                let u = 1.0 - v;
                lf((-v).ln_1p(), v.ln(), u).exp()
            }),
        });
    }
    let h = 0.5f64.powi(depth);
    let ln_h = h.ln();
    let (p0, p1) = (ig.p0, ig.p1);
    if needs_substitution(p0) {
        // u = h t^{1/(p+1)} turns u^p du into a multiple of dt.
        out.push(Piece {
            a: 0.0,
            b: 1.0,
            f: Box::new(move |t: f64| {
                let lu = ln_h + t.ln() / (p0 + 1.0);
                let u = lu.exp();
                (lf(lu, (-u).ln_1p(), u) - p0 * (lu - ln_h)).exp() * h / (p0 + 1.0)
            }),
        });
    } else {
        out.push(Piece { a: 0.0, b: h, f: Box::new(move |u: f64| lf(u.ln(), (-u).ln_1p(), u).exp()) });
    }
    if needs_substitution(p1) {
        out.push(Piece {
            a: 0.0,
            b: 1.0,
            f: Box::new(move |t: f64| {
                let lv = ln_h + t.ln() / (p1 + 1.0);
                let v = lv.exp();
                (lf((-v).ln_1p(), lv, 1.0 - v) - p1 * (lv - ln_h)).exp() * h / (p1 + 1.0)
            }),
        });
    } else {
        out.push(Piece {
            a: 0.0,
            b: h,
            f: Box::new(move |v: f64| lf((-v).ln_1p(), v.ln(), 1.0 - v).exp()),
        });
    }
    out
}

/// One mean count by quadrature against `γ · levy_density`.
pub fn phi_value(params: &BPParams, kind: CurveKind, x: f64) -> Result<QuadResult> {
    params.validate()?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("mean counts need a positive abscissa, got {x}")));
    }
    match integrand(params, kind, x)? {
        None => Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 }),
        Some(ig) => integrate_pieces(&pieces(&ig, x), QuadOptions::default()),
    }
}

/// Mean counts of `kind` at each point.
pub fn phi_exact(params: &BPParams, kind: CurveKind, points: &[f64]) -> Result<MeanCurve> {
    if points.is_empty() {
        return Err(Error::domain("phi_exact needs at least one point"));
    }
    let mut values = Vec::with_capacity(points.len());
    let mut abs_errors = Vec::with_capacity(points.len());
    for &x in points {
        let r = phi_value(params, kind, x)?;
        values.push(r.value);
        abs_errors.push(r.abs_error);
    }
    Ok(MeanCurve { kind, abscissae: points.to_vec(), values, abs_errors })
}

fn require_discount(params: &BPParams, what: &str) -> Result<()> {
    params.validate()?;
    if params.alpha == 0.0 {
        return Err(Error::domain(format!(
            "{what} is undefined for alpha = 0; the growth is logarithmic (use two_param_phi)"
        )));
    }
    Ok(())
}

/// `C = (γ/α) Γ(1+θ) / (Γ(1-α) Γ(θ+α))`.
pub fn asymptotic_constant_c(params: &BPParams) -> Result<f64> {
    require_discount(params, "the asymptotic constant")?;
    Ok((params.gamma / params.alpha) * params.log_levy_norm().exp())
}

/// `K_N ~ Γ(1-α) C N^α`.
pub fn asymptotic_kn(params: &BPParams, n: f64) -> Result<f64> {
    Ok(asymptotic_kn_law(params)?.eval(n))
}

pub fn asymptotic_kn_law(params: &BPParams) -> Result<AsymptoticLaw> {
    let c = asymptotic_constant_c(params)?;
    AsymptoticLaw::new(ln_gamma(1.0 - params.alpha).exp() * c, params.alpha)
}

/// `K_{N,j} ~ α Γ(j-α) / j! · C N^α`.
pub fn asymptotic_knj(params: &BPParams, n: f64, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::domain("asymptotic_knj needs j >= 1"));
    }
    let c = asymptotic_constant_c(params)?;
    let a = params.alpha;
    let jf = j as f64;
    let lead = (a.ln() + ln_gamma(jf - a) - ln_gamma(jf + 1.0)).exp();
    Ok(lead * c * n.powf(a))
}

/// Exact means for the two-parameter case `α = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoParamPhi {
    /// `Φ_N = Σ_{n=0}^{N-1} γθ/(n+θ)`.
    pub phi_n: f64,
    /// `Φ_{N,1} = γ θN/(N-1+θ)`.
    pub phi_n1: f64,
    /// `θN/(N-1+θ)`, the singleton mean per unit of mass.
    pub phi_n1_unit_mass: f64,
}

pub fn two_param_phi(params: &BPParams, n: u64) -> Result<TwoParamPhi> {
    params.validate()?;
    if params.alpha != 0.0 {
        return Err(Error::domain(format!("two_param_phi needs alpha = 0, got {}", params.alpha)));
    }
    if n == 0 {
        return Err(Error::domain("two_param_phi needs N >= 1"));
    }
    let BPParams { gamma, theta, .. } = *params;
    // Summing smallest terms first limits rounding growth.
    let phi_n = (0..n).rev().map(|k| theta / (k as f64 + theta)).sum::<f64>() * gamma;
    let nf = n as f64;
    let unit = theta * nf / (nf - 1.0 + theta);
    Ok(TwoParamPhi { phi_n, phi_n1: gamma * unit, phi_n1_unit_mass: unit })
}

/// Large-N limit of the per-unit-mass singleton mean, `θ`.
pub fn two_param_phi_n1_limit(params: &BPParams) -> Result<f64> {
    params.validate()?;
    if params.alpha != 0.0 {
        return Err(Error::domain("two_param_phi_n1_limit needs alpha = 0"));
    }
    Ok(params.theta)
}

/// `#{i : q_i >= x} ~ C x^{-α}` for the ranked weights.
pub fn ranked_weight_law(params: &BPParams, x: f64) -> Result<f64> {
    let c = asymptotic_constant_c(params)?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::domain(format!("ranked_weight_law needs x in (0, 1], got {x}")));
    }
    Ok(c * x.powf(-params.alpha))
}

/// Chernoff bound `e^{M-Q} Q^M M^{-M}` on `P(k_n >= M)` when `k_n` has mean `Q`.
pub fn chernoff_tail(q: f64, m: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) || !(m > q && m.is_finite()) {
        return Err(Error::domain(format!("chernoff_tail needs M > Q > 0, got Q = {q}, M = {m}")));
    }
    Ok((m - q + m * q.ln() - m * m.ln()).exp())
}

/// Which points a power-law fit uses.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum FitRange {
    All,
    /// Points with `x` at or above the midpoint of the abscissa range.
    #[default]
    UpperHalf,
    /// Points with `lo <= x <= hi`.
    Between(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    /// `exp(intercept)` of the log-log regression.
    pub c: f64,
    /// Slope of the log-log regression.
    pub a: f64,
    /// Root-mean-square residual in log space.
    pub residual_rms: f64,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl PowerLawFit {
    /// The fit as an asymptotic law; fails unless `0 < a < 1`.
    pub fn law(&self) -> Result<AsymptoticLaw> {
        AsymptoticLaw::new(self.c, self.a)
    }
}

/// Least squares of `ln y` on `ln x` over the points selected by `range`.
pub fn fit_power_law(xs: &[f64], ys: &[f64], range: FitRange) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::domain("fit_power_law needs equally many x and y values"));
    }
    if let Some(i) = (0..xs.len()).find(|&i| !(xs[i] > 0.0 && ys[i] > 0.0) || !xs[i].is_finite() || !ys[i].is_finite()) {
        return Err(Error::domain(format!("fit_power_law needs positive finite data; point {i} is ({}, {})", xs[i], ys[i])));
    }
    let (lo, hi) = match range {
        FitRange::All => (f64::NEG_INFINITY, f64::INFINITY),
        FitRange::UpperHalf => {
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0.5 * (min + max), f64::INFINITY)
        }
        FitRange::Between(lo, hi) => (lo, hi),
    };
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(&x, _)| x >= lo && x <= hi).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::domain(format!("fit_power_law needs at least 3 points in range, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_power_law needs at least two distinct x values"));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - b - a * p.0).powi(2)).sum();
    let x_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).exp();
    let x_max = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(PowerLawFit { c: b.exp(), a, residual_rms: (rss / n).sqrt(), n_points: pts.len(), x_min, x_max })
}
