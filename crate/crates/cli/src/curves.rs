//! `curves`: exact mean feature counts by quadrature next to their
//! asymptotic laws (and the closed forms when α = 0).

use std::io::Write;
use std::path::Path;

use betaproc_core::powerlaw::{asymptotic_kn, asymptotic_knj, phi_exact, two_param_phi};
use betaproc_core::{BPParams, CurveKind};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::output::{num, CliError, CliResult, Outputs};
use crate::svg::{Plot, Series, Style};

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvesSpec {
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// phi-n, phi-t, phi-nj or phi-tj.
    #[arg(long, default_value = "phi-n")]
    pub kind: String,
    /// Feature multiplicity for phi-nj and phi-tj.
    #[arg(long, default_value_t = 1)]
    pub j: u32,
    /// Abscissae (draw counts or times), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub points: Vec<f64>,
    /// Log-spaced grid `lo:hi:count`, used when --points is absent.
    #[arg(long)]
    pub log_grid: Option<String>,
}

pub fn parse_kind(kind: &str, j: u32) -> CliResult<CurveKind> {
    match kind {
        "phi-n" => Ok(CurveKind::PhiN),
        "phi-t" => Ok(CurveKind::PhiT),
        "phi-nj" => Ok(CurveKind::PhiNj(j)),
        "phi-tj" => Ok(CurveKind::PhiTj(j)),
        other => Err(CliError::usage(format!("unknown curve kind {other:?}; expected phi-n, phi-t, phi-nj or phi-tj"))),
    }
}

pub fn grid(spec: &CurvesSpec) -> CliResult<Vec<f64>> {
    if !spec.points.is_empty() {
        return Ok(spec.points.clone());
    }
    let Some(g) = &spec.log_grid else {
        return Err(CliError::usage("curves needs a non-empty grid (--points or --log-grid)"));
    };
    let parts: Vec<&str> = g.split(':').collect();
    let bad = || CliError::usage(format!("--log-grid must be lo:hi:count with 0 < lo < hi, got {g:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(bad());
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo * (step * i as f64).exp() }).collect())
}

fn asymptotic(params: &BPParams, kind: CurveKind, x: f64) -> Option<f64> {
    if params.alpha == 0.0 {
        return None;
    }
    match kind {
        CurveKind::PhiN | CurveKind::PhiT => asymptotic_kn(params, x).ok(),
        CurveKind::PhiNj(j) | CurveKind::PhiTj(j) => asymptotic_knj(params, x, j).ok(),
    }
}

fn closed_form(params: &BPParams, kind: CurveKind, x: f64) -> Option<f64> {
    if params.alpha != 0.0 || x < 1.0 || x.fract() != 0.0 {
        return None;
    }
    let t = two_param_phi(params, x as u64).ok()?;
    match kind {
        CurveKind::PhiN => Some(t.phi_n),
        CurveKind::PhiNj(1) => Some(t.phi_n1),
        _ => None,
    }
}

pub fn execute(spec: &CurvesSpec, outdir: &Path) -> CliResult<Vec<String>> {
    let params = BPParams::new(spec.gamma, spec.theta, spec.alpha)?;
    let kind = parse_kind(&spec.kind, spec.j)?;
    let xs = grid(spec)?;
    let curve = phi_exact(&params, kind, &xs)?;
    let asym: Vec<Option<f64>> = xs.iter().map(|&x| asymptotic(&params, kind, x)).collect();
    let closed: Vec<Option<f64>> = xs.iter().map(|&x| closed_form(&params, kind, x)).collect();
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();

    let mut out = Outputs::create(outdir, None)?;
    out.csv("curves.csv", |w| {
        writeln!(w, "x,exact,abs_error,asymptotic,ratio,closed_form")?;
        for i in 0..xs.len() {
            let ratio = asym[i].map(|a| curve.values[i] / a);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                num(xs[i]),
                num(curve.values[i]),
                num(curve.abs_errors[i]),
                opt(asym[i]),
                opt(ratio),
                opt(closed[i])
            )?;
        }
        Ok(())
    })?;

    let mut series = vec![Series::new(format!("{kind} exact"), xs.iter().copied().zip(curve.values.iter().copied()).collect(), Style::Line, "red")];
    let asym_pts: Vec<(f64, f64)> = xs.iter().zip(&asym).filter_map(|(&x, a)| a.map(|a| (x, a))).collect();
    if !asym_pts.is_empty() {
        series.push(Series::new("asymptotic", asym_pts, Style::Line, "green"));
    }
    let plot = Plot {
        title: format!("{kind} for gamma={}, theta={}, alpha={}", spec.gamma, spec.theta, spec.alpha),
        x_label: "N".into(),
        y_label: kind.to_string(),
        log_x: true,
        log_y: true,
        series,
    };
    out.text("curves.svg", &plot.render())?;
    Ok(out.into_names())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CurvesSpec {
        CurvesSpec { gamma: 3.0, theta: 1.0, alpha: 0.5, kind: "phi-n".into(), j: 1, points: vec![], log_grid: None }
    }

    #[test]
    fn grids() {
        assert!(grid(&spec()).is_err());
        let g = grid(&CurvesSpec { log_grid: Some("10:1000:3".into()), ..spec() }).unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 100.0).abs() < 1e-9 && g[2] == 1000.0);
        assert!(grid(&CurvesSpec { log_grid: Some("10:1".into()), ..spec() }).is_err());
        assert_eq!(grid(&CurvesSpec { points: vec![5.0], ..spec() }).unwrap(), vec![5.0]);
    }

    #[test]
    fn kinds() {
        assert_eq!(parse_kind("phi-tj", 2).unwrap(), CurveKind::PhiTj(2));
        assert!(parse_kind("phi", 1).is_err());
    }

    #[test]
    fn closed_form_only_for_alpha_zero_integers() {
        let p = BPParams::new(3.0, 1.0, 0.0).unwrap();
        assert!((closed_form(&p, CurveKind::PhiN, 1.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(closed_form(&p, CurveKind::PhiN, 1.5).is_none());
        assert!(closed_form(&p, CurveKind::PhiT, 2.0).is_none());
        let q = BPParams::new(3.0, 1.0, 0.5).unwrap();
        assert!(closed_form(&q, CurveKind::PhiN, 2.0).is_none());
        assert!(asymptotic(&p, CurveKind::PhiN, 10.0).is_none());
        assert!(asymptotic(&q, CurveKind::PhiN, 10.0).is_some());
    }
}
