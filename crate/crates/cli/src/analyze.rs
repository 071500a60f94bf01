//! `analyze`: log-log power-law fit of a two-column series.

use std::io::Write;
use std::path::{Path, PathBuf};

use betaproc_core::powerlaw::{fit_power_law, FitRange};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::output::{io_error, num, read_table, CliError, CliResult, Outputs};
use crate::svg::{Plot, Series, Style};

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSpec {
    /// CSV with a header; `#` lines are ignored.
    #[arg(long)]
    pub input: PathBuf,
    /// Abscissa column name (default: first column).
    #[arg(long)]
    pub x: Option<String>,
    /// Ordinate column name (default: second column).
    #[arg(long)]
    pub y: Option<String>,
    /// Fit window on x: `upper-half`, `all` or `lo:hi`.
    #[arg(long, default_value = "upper-half")]
    pub range: String,
    /// Average y over rows that share an x value (e.g. replicates) first.
    #[arg(long)]
    pub group_mean: bool,
}

pub fn parse_range(text: &str) -> CliResult<FitRange> {
    match text {
        "upper-half" => Ok(FitRange::UpperHalf),
        "all" => Ok(FitRange::All),
        other => {
            let bad = || CliError::usage(format!("--range must be upper-half, all or lo:hi, got {other:?}"));
            let (lo, hi) = other.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.parse().map_err(|_| bad())?;
            let hi: f64 = hi.parse().map_err(|_| bad())?;
            if !(lo <= hi) {
                return Err(bad());
            }
            Ok(FitRange::Between(lo, hi))
        }
    }
}

fn column(columns: &[String], name: Option<&str>, default: usize) -> CliResult<usize> {
    match name {
        Some(n) => columns.iter().position(|c| c == n).ok_or_else(|| CliError::usage(format!("no column named {n:?}"))),
        None if default < columns.len() => Ok(default),
        None => Err(CliError::usage("input needs at least two columns")),
    }
}

/// Points inside the fit window, optionally averaged per x.
pub fn select(xs: &[f64], ys: &[f64], range: FitRange, group_mean: bool) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = match range {
        FitRange::All => (f64::NEG_INFINITY, f64::INFINITY),
        FitRange::UpperHalf => {
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0.5 * (min + max), f64::INFINITY)
        }
        FitRange::Between(lo, hi) => (lo, hi),
    };
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).filter(|&(x, _)| x >= lo && x <= hi).collect();
    if group_mean {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut grouped: Vec<(f64, f64, usize)> = Vec::new();
        for (x, y) in pts {
            match grouped.last_mut() {
                Some(g) if g.0 == x => {
                    g.1 += y;
                    g.2 += 1;
                }
                _ => grouped.push((x, y, 1)),
            }
        }
        pts = grouped.into_iter().map(|(x, s, c)| (x, s / c as f64)).collect();
    }
    pts.into_iter().unzip()
}

pub fn execute(spec: &AnalyzeSpec, outdir: &Path) -> CliResult<Vec<String>> {
    if !spec.input.exists() {
        return Err(io_error(&spec.input, "file not found"));
    }
    let table = read_table(&spec.input)?;
    let xi = column(&table.columns, spec.x.as_deref(), 0)?;
    let yi = column(&table.columns, spec.y.as_deref(), 1)?;
    let xs: Vec<f64> = table.rows.iter().map(|r| r[xi]).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r[yi]).collect();
    let range = parse_range(&spec.range)?;
    let (fx, fy) = select(&xs, &ys, range, spec.group_mean);
    let fit = fit_power_law(&fx, &fy, FitRange::All)?;

    let mut out = Outputs::create(outdir, None)?;
    out.csv("fit.csv", |w| {
        writeln!(w, "c,a,residual_rms,n_points,x_min,x_max,range,x_column,y_column")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            num(fit.c),
            num(fit.a),
            num(fit.residual_rms),
            fit.n_points,
            num(fit.x_min),
            num(fit.x_max),
            spec.range,
            table.columns[xi],
            table.columns[yi]
        )
    })?;
    let line: Vec<(f64, f64)> = [fit.x_min, fit.x_max].iter().map(|&x| (x, fit.c * x.powf(fit.a))).collect();
    let plot = Plot {
        title: format!("Power-law fit: a = {:.4}", fit.a),
        x_label: table.columns[xi].clone(),
        y_label: table.columns[yi].clone(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::new("fitted points", fx.iter().copied().zip(fy.iter().copied()).collect(), Style::Points, "black"),
            Series::new("c x^a", line, Style::Line, "red"),
        ],
    };
    out.text("fit.svg", &plot.render())?;
    Ok(out.into_names())
}
