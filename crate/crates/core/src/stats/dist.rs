use rand_distr::{Distribution, StandardNormal};

use super::rng::RandomStream;
use super::special::ln_gamma;
use crate::error::{Error, Result};

/// A scalar sampling family with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistSpec {
    Beta { a: f64, b: f64 },
    /// Gamma with the given shape and rate (inverse scale).
    Gamma { shape: f64, rate: f64 },
    Poisson { lambda: f64 },
    Bernoulli { p: f64 },
    /// Normal with mean and variance (not standard deviation).
    Normal { mean: f64, var: f64 },
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DistSpec::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            DistSpec::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            DistSpec::Poisson { lambda } => lambda >= 0.0 && lambda.is_finite(),
            DistSpec::Bernoulli { p } => (0.0..=1.0).contains(&p),
            DistSpec::Normal { mean, var } => mean.is_finite() && var >= 0.0 && var.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid distribution parameters: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Beta { a, b } => a / (a + b),
            DistSpec::Gamma { shape, rate } => shape / rate,
            DistSpec::Poisson { lambda } => lambda,
            DistSpec::Bernoulli { p } => p,
            DistSpec::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistSpec::Beta { a, b } => a * b / ((a + b) * (a + b) * (a + b + 1.0)),
            DistSpec::Gamma { shape, rate } => shape / (rate * rate),
            DistSpec::Poisson { lambda } => lambda,
            DistSpec::Bernoulli { p } => p * (1.0 - p),
            DistSpec::Normal { var, .. } => var,
        }
    }
}

/// Draws one variate from `spec`.
pub fn draw(spec: &DistSpec, stream: &mut RandomStream) -> Result<f64> {
    spec.validate()?;
    Ok(match *spec {
        DistSpec::Beta { a, b } => {
            let (ln_v, ln_1mv) = sample_log_beta(stream, a, b);
            // Keep the value strictly inside (0, 1) even when a shape is tiny.
            if ln_1mv > -f64::EPSILON {
                ln_v.exp().max(f64::MIN_POSITIVE)
            } else {
                (-ln_1mv.exp_m1()).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
            }
        }
        DistSpec::Gamma { shape, rate } => sample_gamma(stream, shape) / rate,
        DistSpec::Poisson { lambda } => sample_poisson(stream, lambda) as f64,
        DistSpec::Bernoulli { p } => {
            if stream.uniform() < p {
                1.0
            } else {
                0.0
            }
        }
        DistSpec::Normal { mean, var } => sample_normal(stream, mean, var.sqrt()),
    })
}

#[inline]
pub fn sample_normal(stream: &mut RandomStream, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(stream);
    mean + sd * z
}

/// Marsaglia–Tsang for shape >= 1; returns `(d, v)` with the variate `d * v`.
#[inline]
fn marsaglia_tsang(stream: &mut RandomStream, shape: f64) -> (f64, f64) {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(stream);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = stream.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d, v);
        }
    }
}

/// Gamma(shape, rate = 1). Shapes below one use the `G(a+1) U^{1/a}` boost.
pub fn sample_gamma(stream: &mut RandomStream, shape: f64) -> f64 {
    sample_log_gamma(stream, shape).exp()
}

/// `ln G` for `G ~ Gamma(shape, 1)`, accurate even when `G` underflows.
#[inline]
pub(crate) fn sample_log_gamma(stream: &mut RandomStream, shape: f64) -> f64 {
    if shape >= 1.0 {
        let (d, v) = marsaglia_tsang(stream, shape);
        d.ln() + v.ln()
    } else {
        let (d, v) = marsaglia_tsang(stream, shape + 1.0);
        d.ln() + v.ln() + stream.uniform().ln() / shape
    }
}

/// Returns `(ln V, ln(1 - V))` for `V ~ Beta(a, b)`.
///
/// Built from two Gamma draws; `a == 1` uses exact inversion
/// `1 - V = U^{1/b}`.
#[inline]
pub fn sample_log_beta(stream: &mut RandomStream, a: f64, b: f64) -> (f64, f64) {
    if a == 1.0 {
        let ln_1mv = stream.uniform().ln() / b;
        return (super::special::log1m_exp(ln_1mv), ln_1mv);
    }
    let la = sample_log_gamma(stream, a);
    let lb = sample_log_gamma(stream, b);
    let m = la.max(lb);
    let lsum = m + ((la - m).exp() + (lb - m).exp()).ln();
    (la - lsum, lb - lsum)
}

/// `1 - V` for `V ~ Beta(a, b)`, computed in linear space.
///
/// Cheaper than [`sample_log_beta`] when only the complement is needed.
/// Falls back to log space if the ratio would underflow.
#[inline]
pub(crate) fn sample_one_minus_beta(stream: &mut RandomStream, a: f64, b: f64) -> f64 {
    let ga = linear_gamma(stream, a);
    let gb = linear_gamma(stream, b);
    let r = gb / (ga + gb);
    if r.is_normal() {
        r
    } else {
        sample_log_beta(stream, a, b).1.exp()
    }
}

#[inline]
fn linear_gamma(stream: &mut RandomStream, shape: f64) -> f64 {
    if shape >= 1.0 {
        let (d, v) = marsaglia_tsang(stream, shape);
        d * v
    } else {
        let (d, v) = marsaglia_tsang(stream, shape + 1.0);
        d * v * stream.uniform().powf(1.0 / shape)
    }
}

/// Poisson variate: sequential inversion for `lambda <= 30`, Hörmann's
/// transformed rejection (PTRS) above.
pub fn sample_poisson(stream: &mut RandomStream, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda <= 30.0 {
        let mut k = 0u64;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let u = stream.uniform();
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p < f64::MIN_POSITIVE && cdf < u {
                // Rounding left a sliver of mass past the representable tail.
                break;
            }
        }
        return k;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = stream.uniform() - 0.5;
        let v = stream.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(spec: DistSpec, n: usize, seed: u64) -> (f64, f64) {
        let mut s = RandomStream::from_seed(seed);
        let xs: Vec<f64> = (0..n).map(|_| draw(&spec, &mut s).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
        (m, v)
    }

    // Mean within 5 standard errors; variance within 5 standard errors of
    // the sample variance (using a generous fourth-moment proxy).
    fn check_moments(spec: DistSpec, seed: u64) {
        let n = 100_000;
        let (m, v) = moments(spec, n, seed);
        let se_mean = (spec.variance() / n as f64).sqrt();
        assert!((m - spec.mean()).abs() < 5.0 * se_mean + 1e-12, "{spec:?}: mean {m}");
        let se_var = spec.variance() * (3.0 / n as f64).sqrt() * 2.0;
        assert!((v - spec.variance()).abs() < 5.0 * se_var + 1e-12, "{spec:?}: var {v}");
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut s = RandomStream::from_seed(1);
        for _ in 0..1000 {
            assert_eq!(draw(&DistSpec::Bernoulli { p: 1.0 }, &mut s).unwrap(), 1.0);
            assert_eq!(draw(&DistSpec::Bernoulli { p: 0.0 }, &mut s).unwrap(), 0.0);
        }
    }

    #[test]
    fn beta_mean_for_discounted_stick() {
        let spec = DistSpec::Beta { a: 1.0 - 0.3, b: 1.0 + 0.3 };
        let (m, _) = moments(spec, 100_000, 3);
        assert!((m - 0.35).abs() < 0.01, "{m}");
    }

    #[test]
    fn poisson_mean_at_three() {
        let (m, _) = moments(DistSpec::Poisson { lambda: 3.0 }, 100_000, 4);
        assert!((m - 3.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn family_moments() {
        let specs = [
            DistSpec::Beta { a: 0.4, b: 1.6 },
            DistSpec::Beta { a: 1.0, b: 3.0 },
            DistSpec::Beta { a: 0.05, b: 200.0 },
            DistSpec::Gamma { shape: 0.3, rate: 2.0 },
            DistSpec::Gamma { shape: 7.5, rate: 0.5 },
            DistSpec::Poisson { lambda: 0.2 },
            DistSpec::Poisson { lambda: 29.0 },
            DistSpec::Poisson { lambda: 31.0 },
            DistSpec::Poisson { lambda: 1000.0 },
            DistSpec::Bernoulli { p: 0.3 },
            DistSpec::Normal { mean: -1.0, var: 4.0 },
        ];
        for (i, spec) in specs.into_iter().enumerate() {
            check_moments(spec, 100 + i as u64);
        }
    }

    #[test]
    fn beta_stays_in_open_interval() {
        let mut s = RandomStream::from_seed(9);
        for spec in [DistSpec::Beta { a: 0.01, b: 0.01 }, DistSpec::Beta { a: 1.0, b: 1e-3 }] {
            for _ in 0..10_000 {
                let v = draw(&spec, &mut s).unwrap();
                assert!(v > 0.0 && v < 1.0, "{v}");
            }
        }
    }

    #[test]
    fn log_beta_pair_is_consistent() {
        let mut s = RandomStream::from_seed(10);
        for &(a, b) in &[(0.4, 1.6), (1.0, 2.0), (3.0, 0.5)] {
            for _ in 0..1000 {
                let (lv, l1mv) = sample_log_beta(&mut s, a, b);
                assert!((lv.exp() + l1mv.exp() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_complement_matches_beta_moments() {
        let mut s = RandomStream::from_seed(12);
        for &(a, b) in &[(0.7, 1.3), (0.4, 20.0), (0.1, 0.05)] {
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_one_minus_beta(&mut s, a, b)).collect();
            assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let m = xs.iter().sum::<f64>() / n as f64;
            let spec = DistSpec::Beta { a: b, b: a };
            let se = (spec.variance() / n as f64).sqrt();
            assert!((m - spec.mean()).abs() < 5.0 * se, "({a}, {b}): {m}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut s = RandomStream::from_seed(1);
        for spec in [
            DistSpec::Beta { a: 0.0, b: 1.0 },
            DistSpec::Gamma { shape: 1.0, rate: -1.0 },
            DistSpec::Poisson { lambda: -0.1 },
            DistSpec::Bernoulli { p: 1.5 },
            DistSpec::Normal { mean: 0.0, var: -1.0 },
        ] {
            assert!(draw(&spec, &mut s).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let spec = DistSpec::Gamma { shape: 0.7, rate: 1.0 };
        let mut a = RandomStream::new(3, 9);
        let mut b = RandomStream::new(3, 9);
        for _ in 0..100 {
            assert_eq!(draw(&spec, &mut a).unwrap().to_bits(), draw(&spec, &mut b).unwrap().to_bits());
        }
    }
}
