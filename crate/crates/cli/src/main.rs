//! `betaproc`: simulation, exact curves, factor-model inference and fitting
//! for the three-parameter beta process.

mod analyze;
mod curves;
mod infer;
mod manifest;
mod output;
mod simulate;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::manifest::RunManifest;
use crate::output::{io_error, CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "betaproc", version, about = "Three-parameter beta process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate beta-Bernoulli feature matrices and summarize their counts.
    Simulate {
        #[command(flatten)]
        spec: simulate::SimulateSpec,
        #[arg(long, default_value = "out/simulate")]
        outdir: PathBuf,
    },
    /// Tabulate exact mean feature counts against their asymptotic laws.
    Curves {
        #[command(flatten)]
        spec: curves::CurvesSpec,
        #[arg(long, default_value = "out/curves")]
        outdir: PathBuf,
    },
    /// Run the factor-model sampler on data or on synthetic data.
    Infer {
        #[command(flatten)]
        args: infer::InferArgs,
        #[arg(long, default_value = "out/infer")]
        outdir: PathBuf,
    },
    /// Fit a power law to two columns of a CSV file.
    Analyze {
        #[command(flatten)]
        spec: analyze::AnalyzeSpec,
        #[arg(long, default_value = "out/analyze")]
        outdir: PathBuf,
    },
    /// Re-run a command from its manifest.
    Replay {
        /// Path to a manifest.json written by another command.
        manifest: PathBuf,
        /// Where to write (default: the manifest's directory).
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
}

fn to_value<T: serde::Serialize>(spec: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(spec).map_err(|e| CliError::Io(e.to_string()))
}

fn finish(name: &str, seed: Option<u64>, params: serde_json::Value, outputs: Vec<String>, outdir: &Path) -> CliResult<()> {
    RunManifest::new(name, seed, params, outputs).write(outdir)?;
    println!("wrote {}", outdir.display());
    Ok(())
}

fn run_simulate(spec: &simulate::SimulateSpec, outdir: &Path) -> CliResult<()> {
    let files = simulate::execute(spec, outdir)?;
    finish("simulate", Some(spec.seed), to_value(spec)?, files, outdir)
}

fn run_curves(spec: &curves::CurvesSpec, outdir: &Path) -> CliResult<()> {
    let files = curves::execute(spec, outdir)?;
    finish("curves", None, to_value(spec)?, files, outdir)
}

fn run_infer(spec: &infer::InferSpec, outdir: &Path) -> CliResult<()> {
    let files = infer::execute(spec, outdir)?;
    finish("infer", Some(spec.seed()?), to_value(spec)?, files, outdir)
}

fn run_analyze(spec: &analyze::AnalyzeSpec, outdir: &Path) -> CliResult<()> {
    let files = analyze::execute(spec, outdir)?;
    finish("analyze", None, to_value(spec)?, files, outdir)
}

fn replay(path: &Path, outdir: Option<PathBuf>) -> CliResult<()> {
    let m = RunManifest::read(path)?;
    let outdir = outdir.unwrap_or_else(|| path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
    match m.command.as_str() {
        "simulate" => run_simulate(&m.params()?, &outdir),
        "curves" => run_curves(&m.params()?, &outdir),
        "infer" => run_infer(&m.params()?, &outdir),
        "analyze" => run_analyze(&m.params()?, &outdir),
        other => Err(CliError::usage(format!("manifest names unknown command {other:?}"))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { spec, outdir } => run_simulate(&spec, &outdir),
        Command::Curves { spec, outdir } => run_curves(&spec, &outdir),
        Command::Infer { args, outdir } => run_infer(&infer::resolve(&args)?, &outdir),
        Command::Analyze { mut spec, outdir } => {
            spec.input = std::fs::canonicalize(&spec.input).map_err(|e| io_error(&spec.input, e))?;
            run_analyze(&spec, &outdir)
        }
        Command::Replay { manifest, outdir } => replay(&manifest, outdir),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
fn real_main<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("betaproc: {e}");
            e.exit_code() as u8
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(real_main(std::env::args_os()))
}
