//! Per-iteration records and their autocorrelation.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub k: usize,
    pub theta: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Per-element reconstruction error.
    pub rmse: f64,
    /// Data log-likelihood given every latent.
    pub log_lik: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub thin: usize,
}

impl Trace {
    pub fn new(thin: usize) -> Self {
        Trace { records: Vec::new(), thin }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records strictly after `burn_in` iterations.
    pub fn after(&self, burn_in: usize) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.iteration > burn_in)
    }

    /// Most frequent K after burn-in (smallest on ties).
    pub fn k_mode(&self, burn_in: usize) -> Option<usize> {
        let mut counts = std::collections::BTreeMap::new();
        for r in self.after(burn_in) {
            *counts.entry(r.k).or_insert(0usize) += 1;
        }
        let best = counts.values().copied().max()?;
        counts.into_iter().find(|&(_, c)| c == best).map(|(k, _)| k)
    }

    pub fn mean_after<F: Fn(&TraceRecord) -> f64>(&self, burn_in: usize, f: F) -> Option<f64> {
        let v: Vec<f64> = self.after(burn_in).map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,K,theta,alpha,gamma,rmse,log_lik")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{},{:e},{:e}", r.iteration, r.k, r.theta, r.alpha, r.gamma, r.rmse, r.log_lik)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    /// Values at lags `0..=max_lag`.
    pub values: Vec<f64>,
    /// Set when the series had zero variance; values are then 1 at lag 0
    /// and 0 elsewhere by convention.
    pub constant: bool,
}

/// Sample autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    if series.len() <= max_lag {
        return Err(Error::domain(format!(
            "autocorrelation needs more than {max_lag} values, got {}",
            series.len()
        )));
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = d.iter().map(|x| x * x).sum();
    if c0 == 0.0 {
        let mut values = vec![0.0; max_lag + 1];
        values[0] = 1.0;
        return Ok(Autocorrelation { values, constant: true });
    }
    let values = (0..=max_lag)
        .map(|lag| if lag == 0 { 1.0 } else { d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0 })
        .collect();
    Ok(Autocorrelation { values, constant: false })
}
