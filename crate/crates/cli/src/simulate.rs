//! `simulate`: BP-BeP feature matrices for several discounts, with count
//! summaries and comparison plots against the exact and asymptotic laws.

use std::io::Write;
use std::path::Path;

use betaproc_core::bep::{bp_bep_with_draw, count_stats};
use betaproc_core::powerlaw::{asymptotic_kn, asymptotic_knj, chernoff_tail, phi_exact, phi_value, ranked_weight_law};
use betaproc_core::{BPParams, CountStats, CurveKind, RandomStream};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::output::{log_spaced, num, tag, CliError, CliResult, Outputs};
use crate::svg::{Plot, Series, Style};

const EMPIRICAL_COLORS: [&str; 4] = ["black", "blue", "purple", "darkorange"];

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateSpec {
    /// Mass parameter.
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    /// Concentration parameter.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Discount values, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.3, 0.6])]
    pub alpha: Vec<f64>,
    /// Rows per feature matrix.
    #[arg(long = "n-data", default_value_t = 1000)]
    pub n_data: usize,
    /// Stick-breaking rounds per draw.
    #[arg(long, default_value_t = 2000)]
    pub rounds: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Independent replicates per discount value.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Worker threads (0 = available parallelism). Does not affect outputs.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
}

struct Replicate {
    stats: CountStats,
    ranked: Vec<f64>,
}

fn run_one(params: &BPParams, spec: &SimulateSpec, stream_id: u64) -> CliResult<Replicate> {
    let mut stream = RandomStream::new(spec.seed, stream_id);
    let (z, draw) = bp_bep_with_draw(params, spec.n_data, spec.rounds, &mut stream)?;
    Ok(Replicate { stats: count_stats(&z), ranked: draw.ranked_weights() })
}

/// Runs every (discount, replicate) job, fanned out over worker threads.
/// Each job owns a stream keyed by its position, so results do not depend
/// on scheduling.
fn run_all(spec: &SimulateSpec, params: &[BPParams]) -> CliResult<Vec<Vec<Replicate>>> {
    let jobs: Vec<(usize, usize)> = (0..params.len()).flat_map(|a| (0..spec.replicates).map(move |r| (a, r))).collect();
    let threads = if spec.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        spec.threads
    }
    .min(jobs.len())
    .max(1);
    let mut slots: Vec<Option<CliResult<Replicate>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(jobs.len().div_ceil(threads)).zip(jobs.chunks(jobs.len().div_ceil(threads))).collect();
        for (out, todo) in chunks {
            scope.spawn(move || {
                for (slot, &(a, r)) in out.iter_mut().zip(todo) {
                    *slot = Some(run_one(&params[a], spec, ((a as u64) << 32) | r as u64));
                }
            });
        }
    });
    let mut results: Vec<Vec<Replicate>> = (0..params.len()).map(|_| Vec::new()).collect();
    for ((a, _), slot) in jobs.iter().zip(slots) {
        results[*a].push(slot.expect("every job slot is filled")?);
    }
    Ok(results)
}

pub fn validate(spec: &SimulateSpec) -> CliResult<Vec<BPParams>> {
    if spec.alpha.is_empty() {
        return Err(CliError::usage("simulate needs at least one --alpha value"));
    }
    if spec.n_data == 0 || spec.rounds == 0 || spec.replicates == 0 {
        return Err(CliError::usage("--n-data, --rounds and --replicates must all be at least 1"));
    }
    let mut tags: Vec<String> = spec.alpha.iter().map(|&a| tag(a)).collect();
    tags.sort();
    tags.dedup();
    if tags.len() != spec.alpha.len() {
        return Err(CliError::usage("--alpha values must be distinct"));
    }
    spec.alpha.iter().map(|&a| BPParams::new(spec.gamma, spec.theta, a).map_err(CliError::from)).collect()
}

pub fn execute(spec: &SimulateSpec, outdir: &Path) -> CliResult<Vec<String>> {
    let params = validate(spec)?;
    let results = run_all(spec, &params)?;
    let mut out = Outputs::create(outdir, Some(spec.seed))?;

    for (a, reps) in spec.alpha.iter().zip(&results) {
        let t = tag(*a);
        out.csv(&format!("k_prefix_alpha{t}.csv"), |w| {
            writeln!(w, "n,K,replicate")?;
            for (r, rep) in reps.iter().enumerate() {
                for (n, k) in rep.stats.k_prefix.iter().enumerate() {
                    writeln!(w, "{},{k},{r}", n + 1)?;
                }
            }
            Ok(())
        })?;
        out.csv(&format!("k_hist_alpha{t}.csv"), |w| {
            writeln!(w, "j,count,replicate")?;
            for (r, rep) in reps.iter().enumerate() {
                for (j, c) in &rep.stats.k_hist {
                    writeln!(w, "{j},{c},{r}")?;
                }
            }
            Ok(())
        })?;
        out.csv(&format!("row_counts_alpha{t}.csv"), |w| {
            writeln!(w, "n,k,replicate")?;
            for (r, rep) in reps.iter().enumerate() {
                for (n, k) in rep.stats.row_counts.iter().enumerate() {
                    writeln!(w, "{},{k},{r}", n + 1)?;
                }
            }
            Ok(())
        })?;
        out.csv(&format!("ranked_weights_alpha{t}.csv"), |w| {
            writeln!(w, "rank,weight,replicate")?;
            for (r, rep) in reps.iter().enumerate() {
                for (i, x) in rep.ranked.iter().enumerate() {
                    writeln!(w, "{},{},{r}", i + 1, num(*x))?;
                }
            }
            Ok(())
        })?;
    }

    out.text("sim_k.svg", &k_plot(spec, &params, &results)?.render())?;
    out.text("sim_hist.svg", &hist_plot(spec, &params, &results)?.render())?;
    out.text("sim_rows.svg", &rows_plot(spec, &results)?.render())?;
    out.text("sim_freqs.svg", &freqs_plot(spec, &params, &results)?.render())?;
    Ok(out.into_names())
}

fn mean_prefix(reps: &[Replicate], n: usize) -> f64 {
    reps.iter().map(|r| r.stats.k_prefix[n - 1] as f64).sum::<f64>() / reps.len() as f64
}

fn k_plot(spec: &SimulateSpec, params: &[BPParams], results: &[Vec<Replicate>]) -> CliResult<Plot> {
    let grid = log_spaced(spec.n_data, 40);
    let xs: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let mut series = Vec::new();
    for (i, (p, reps)) in params.iter().zip(results).enumerate() {
        let color = EMPIRICAL_COLORS[i % EMPIRICAL_COLORS.len()];
        series.push(Series::new(
            format!("alpha={} K_N", p.alpha),
            grid.iter().map(|&n| (n as f64, mean_prefix(reps, n))).collect(),
            Style::Points,
            color,
        ));
        let exact = phi_exact(p, CurveKind::PhiN, &xs)?;
        series.push(Series::new(
            format!("alpha={} exact", p.alpha),
            xs.iter().copied().zip(exact.values).collect(),
            Style::Line,
            "red",
        ));
        if p.alpha > 0.0 {
            let asym = xs.iter().map(|&x| Ok((x, asymptotic_kn(p, x)?))).collect::<CliResult<Vec<_>>>()?;
            series.push(Series::new(format!("alpha={} asymptotic", p.alpha), asym, Style::Line, "green"));
        }
    }
    Ok(Plot {
        title: "Features seen after N draws".into(),
        x_label: "N".into(),
        y_label: "K_N".into(),
        log_x: true,
        log_y: true,
        series,
    })
}

fn hist_plot(spec: &SimulateSpec, params: &[BPParams], results: &[Vec<Replicate>]) -> CliResult<Plot> {
    let n = spec.n_data as f64;
    let max_j = spec.n_data.min(50) as u32;
    let mut series = Vec::new();
    for (i, (p, reps)) in params.iter().zip(results).enumerate() {
        let color = EMPIRICAL_COLORS[i % EMPIRICAL_COLORS.len()];
        let pts: Vec<(f64, f64)> = (1..=max_j)
            .map(|j| {
                let c: usize = reps.iter().map(|r| r.stats.k_hist.get(&(j as usize)).copied().unwrap_or(0)).sum();
                (j as f64, c as f64 / reps.len() as f64)
            })
            .collect();
        series.push(Series::new(format!("alpha={} K_N,j", p.alpha), pts, Style::Points, color));
        let exact = (1..=max_j)
            .map(|j| Ok((j as f64, phi_value(p, CurveKind::PhiNj(j), n)?.value)))
            .collect::<CliResult<Vec<_>>>()?;
        series.push(Series::new(format!("alpha={} exact", p.alpha), exact, Style::Line, "red"));
        if p.alpha > 0.0 {
            let asym = (1..=max_j).map(|j| Ok((j as f64, asymptotic_knj(p, n, j)?))).collect::<CliResult<Vec<_>>>()?;
            series.push(Series::new(format!("alpha={} asymptotic", p.alpha), asym, Style::Line, "green"));
        }
    }
    Ok(Plot {
        title: format!("Features seen in exactly j of {} draws", spec.n_data),
        x_label: "j".into(),
        y_label: "K_N,j".into(),
        log_x: true,
        log_y: true,
        series,
    })
}

fn rows_plot(spec: &SimulateSpec, results: &[Vec<Replicate>]) -> CliResult<Plot> {
    let mut series = Vec::new();
    for (i, (a, reps)) in spec.alpha.iter().zip(results).enumerate() {
        let color = EMPIRICAL_COLORS[i % EMPIRICAL_COLORS.len()];
        let counts: Vec<usize> = reps.iter().flat_map(|r| r.stats.row_counts.iter().copied()).collect();
        let total = counts.len() as f64;
        let max = counts.iter().copied().max().unwrap_or(0);
        let mean = counts.iter().sum::<usize>() as f64 / total;
        let tail: Vec<(f64, f64)> =
            (0..=max).map(|m| (m as f64, counts.iter().filter(|&&c| c >= m).count() as f64 / total)).collect();
        series.push(Series::new(format!("alpha={a} P(k_n >= M)"), tail, Style::Points, color));
        if mean > 0.0 {
            let bound: Vec<(f64, f64)> = (mean.floor() as usize + 1..=max + 2)
                .filter_map(|m| chernoff_tail(mean, m as f64).ok().map(|b| (m as f64, b)))
                .collect();
            series.push(Series::new(format!("alpha={a} Chernoff bound"), bound, Style::Line, "red"));
        }
    }
    Ok(Plot {
        title: "Features per draw: tail probability".into(),
        x_label: "M".into(),
        y_label: "P(k_n >= M)".into(),
        log_x: false,
        log_y: true,
        series,
    })
}

fn freqs_plot(spec: &SimulateSpec, params: &[BPParams], results: &[Vec<Replicate>]) -> CliResult<Plot> {
    let mut series = Vec::new();
    for (i, (p, reps)) in params.iter().zip(results).enumerate() {
        let color = EMPIRICAL_COLORS[i % EMPIRICAL_COLORS.len()];
        let ranked = &reps[0].ranked;
        let ranks = log_spaced(ranked.len().max(1), 60);
        let pts: Vec<(f64, f64)> = ranks.iter().filter(|&&k| k <= ranked.len()).map(|&k| (ranked[k - 1], k as f64)).collect();
        series.push(Series::new(format!("alpha={} ranked weights", p.alpha), pts.clone(), Style::Points, color));
        if p.alpha > 0.0 {
            let law = pts.iter().map(|&(x, _)| Ok((x, ranked_weight_law(p, x)?))).collect::<CliResult<Vec<_>>>()?;
            series.push(Series::new(format!("alpha={} C x^-alpha", p.alpha), law, Style::Line, "green"));
        }
    }
    Ok(Plot {
        title: format!("Ranked weights after {} rounds (replicate 0)", spec.rounds),
        x_label: "weight x".into(),
        y_label: "#{weights >= x}".into(),
        log_x: true,
        log_y: true,
        series,
    })
}
