//! `infer`: posterior sampling for the latent factor model on a data file
//! or on synthetic data drawn from the model.

use std::io::Write;
use std::path::{Path, PathBuf};

use betaproc_core::factor::{
    apply_config_text, autocorrelation, generate_synthetic_with_k, initial_state, run_mcmc, FactorHyper, MCMCConfig,
};
use betaproc_core::{BPParams, RandomStream};
use clap::Args;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::output::{io_error, num, read_table, CliError, CliResult, Outputs};
use crate::svg::{Plot, Series, Style};

/// Stream ids below the MCMC's own stream (id 1).
const DATA_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const MAX_ACF_LAG: usize = 50;

#[derive(Args, Clone, Debug)]
pub struct InferArgs {
    /// Numeric CSV data file (rows are observations).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Synthetic data spec, e.g. `n=100,p=16,k=5,alpha=0.5`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Flat key=value sampler configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set")]
    pub set: Vec<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise variance.
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Weight variance.
    #[arg(long, default_value_t = 1.0)]
    pub zeta: f64,
    /// Factor variance, shared by every column.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub theta: f64,
    pub alpha: f64,
    pub rounds: usize,
}

impl SyntheticSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut s = SyntheticSpec { n: 100, p: 16, k: 5, theta: 1.0, alpha: 0.5, rounds: 200 };
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("synthetic spec entries are key=value, got {part:?}")))?;
            let bad = || CliError::usage(format!("cannot parse synthetic {key}={value:?}"));
            match key.trim() {
                "n" => s.n = value.trim().parse().map_err(|_| bad())?,
                "p" => s.p = value.trim().parse().map_err(|_| bad())?,
                "k" => s.k = value.trim().parse().map_err(|_| bad())?,
                "theta" => s.theta = value.trim().parse().map_err(|_| bad())?,
                "alpha" => s.alpha = value.trim().parse().map_err(|_| bad())?,
                "rounds" => s.rounds = value.trim().parse().map_err(|_| bad())?,
                other => return Err(CliError::usage(format!("unknown synthetic key {other:?}"))),
            }
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Everything a run depends on, with the config file already applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferSpec {
    pub data: DataSource,
    pub config: Vec<(String, String)>,
    pub eta: f64,
    pub zeta: f64,
    pub rho: Vec<f64>,
}

impl InferSpec {
    pub fn mcmc_config(&self) -> CliResult<MCMCConfig> {
        let mut c = MCMCConfig::default();
        for (k, v) in &self.config {
            c.set(k, v).map_err(|e| CliError::usage(format!("config {k}: {e}")))?;
        }
        Ok(c)
    }

    pub fn seed(&self) -> CliResult<u64> {
        Ok(self.mcmc_config()?.seed)
    }
}

fn load_data(path: &Path) -> CliResult<DMatrix<f64>> {
    let t = read_table(path)?;
    if t.rows.is_empty() || t.columns.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    let (n, p) = (t.rows.len(), t.columns.len());
    Ok(DMatrix::from_fn(n, p, |i, j| t.rows[i][j]))
}

/// Resolves flags and the config file into a self-contained spec.
pub fn resolve(args: &InferArgs) -> CliResult<InferSpec> {
    let data = match (&args.data, &args.synthetic) {
        (Some(path), None) => {
            let abs = std::fs::canonicalize(path).map_err(|e| io_error(path, e))?;
            DataSource::File(abs)
        }
        (None, Some(text)) => DataSource::Synthetic(SyntheticSpec::parse(text)?),
        _ => return Err(CliError::usage("give exactly one of --data and --synthetic")),
    };
    let mut config = MCMCConfig::default();
    let mut hyper = FactorHyper { eta: args.eta, zeta: args.zeta, rho: vec![args.rho] };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        apply_config_text(&text, &mut config, &mut hyper)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    for item in &args.set {
        apply_config_text(item, &mut config, &mut hyper).map_err(|e| CliError::usage(format!("--set {item}: {e}")))?;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.burn_in {
        config.burn_in = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if config.iterations > 0 && config.burn_in >= config.iterations {
        config.burn_in = config.iterations / 4;
        log::warn!("burn_in was not below iterations; using {}", config.burn_in);
    }
    if config.iterations == 0 {
        config.burn_in = 0;
    }
    config.validate()?;
    Ok(InferSpec { data, config: config.to_key_values(), eta: hyper.eta, zeta: hyper.zeta, rho: hyper.rho })
}

pub fn execute(spec: &InferSpec, outdir: &Path) -> CliResult<Vec<String>> {
    let config = spec.mcmc_config()?;
    config.validate()?;
    let mut out = Outputs::create(outdir, Some(config.seed))?;

    let (x, hyper) = match &spec.data {
        DataSource::Synthetic(s) => {
            let hyper = FactorHyper::new(spec.eta, spec.zeta, expand_rho(&spec.rho, s.p)?)?;
            let params = BPParams::new(1.0, s.theta, s.alpha)?;
            let mut stream = RandomStream::new(config.seed, DATA_STREAM);
            let (x, _) = generate_synthetic_with_k(&params, &hyper, s.n, s.rounds, s.k, &mut stream)?;
            out.csv("data.csv", |w| write_matrix(w, &x, "x"))?;
            (x, hyper)
        }
        DataSource::File(path) => {
            let x = load_data(path)?;
            let hyper = FactorHyper::new(spec.eta, spec.zeta, expand_rho(&spec.rho, x.ncols())?)?;
            (x, hyper)
        }
    };
    let mut init_stream = RandomStream::new(config.seed, INIT_STREAM);
    let init = initial_state(&x, &config, &hyper, &mut init_stream)?;
    let (trace, state) = run_mcmc(&x, &config, &hyper, init)?;

    out.csv("trace.csv", |w| trace.write_csv(w))?;
    let post: Vec<f64> = {
        let v: Vec<f64> = trace.after(config.burn_in).map(|r| r.k as f64).collect();
        if v.len() >= 2 { v } else { trace.records.iter().map(|r| r.k as f64).collect() }
    };
    let acf = autocorrelation(&post, MAX_ACF_LAG.min(post.len() - 1))?;
    out.csv("autocorrelation.csv", |w| {
        writeln!(w, "lag,acf_K,constant")?;
        for (lag, v) in acf.values.iter().enumerate() {
            writeln!(w, "{lag},{},{}", num(*v), acf.constant)?;
        }
        Ok(())
    })?;
    out.csv("z.csv", |w| state.z.write_csv(w))?;
    out.csv("w.csv", |w| write_matrix(w, &state.w, "w"))?;
    out.csv("phi.csv", |w| write_matrix(w, &state.phi, "p"))?;

    let iters: Vec<f64> = trace.records.iter().map(|r| r.iteration as f64).collect();
    let series = |f: fn(&betaproc_core::factor::TraceRecord) -> f64| -> Vec<(f64, f64)> {
        iters.iter().copied().zip(trace.records.iter().map(f)).collect()
    };
    let k_plot = Plot {
        title: "Number of represented features".into(),
        x_label: "iteration".into(),
        y_label: "K".into(),
        series: vec![Series::new("K", series(|r| r.k as f64), Style::Line, "black")],
        ..Default::default()
    };
    let hyper_plot = Plot {
        title: "Hyperparameter traces".into(),
        x_label: "iteration".into(),
        y_label: "value".into(),
        log_y: true,
        series: vec![
            Series::new("theta", series(|r| r.theta), Style::Line, "blue"),
            Series::new("alpha", series(|r| r.alpha), Style::Line, "red"),
            Series::new("gamma", series(|r| r.gamma), Style::Line, "green"),
        ],
        ..Default::default()
    };
    let acf_plot = Plot {
        title: "Autocorrelation of K after burn-in".into(),
        x_label: "lag".into(),
        y_label: "autocorrelation".into(),
        series: vec![Series::new(
            "K",
            acf.values.iter().enumerate().map(|(l, &v)| (l as f64, v)).collect(),
            Style::Points,
            "black",
        )],
        ..Default::default()
    };
    out.text("trace_k.svg", &k_plot.render())?;
    out.text("trace_hyper.svg", &hyper_plot.render())?;
    out.text("autocorrelation.svg", &acf_plot.render())?;
    Ok(out.into_names())
}

fn expand_rho(rho: &[f64], p: usize) -> CliResult<Vec<f64>> {
    match rho.len() {
        1 => Ok(vec![rho[0]; p]),
        n if n == p => Ok(rho.to_vec()),
        n => Err(CliError::usage(format!("rho has {n} entries but the data has {p} columns"))),
    }
}

fn write_matrix(w: &mut Vec<u8>, m: &DMatrix<f64>, prefix: &str) -> std::io::Result<()> {
    let header: Vec<String> = (1..=m.ncols()).map(|c| format!("{prefix}{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| num(m[(r, c)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
