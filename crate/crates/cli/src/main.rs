mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use smflow::verify::{Suite, VerifyOptions};

use config::{RawConfig, RunConfig};
use error::CliError;

/// Schrödinger map flow into S² and two-solution uniqueness diagnostics.
///
/// Exit codes: 0 success, 1 verification failure, 2 configuration error,
/// 3 numeric failure, 4 closeness radius left during `compare`.
#[derive(Parser)]
#[command(name = "smflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one map and write observables and the final state.
    Simulate(RunArgs),
    /// Evolve a map and its ε-perturbation side by side and record Q₁, Q₂.
    Compare(RunArgs),
    /// Run the numerical lemma checks.
    Verify(VerifyArgs),
    /// Turn a compare report into whitespace-separated plot columns.
    EmitPlotdata(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<String>,
    /// Seed of the perturbation direction.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// rk4_project or implicit_midpoint.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<String>,
    #[arg(long)]
    stride: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let flags = [
            ("output.dir", &self.out),
            ("perturbation.seed", &self.seed),
            ("perturbation.eps", &self.eps),
            ("integrator.scheme", &self.scheme),
            ("grid.n", &self.n),
            ("grid.dim", &self.dim),
            ("integrator.dt", &self.dt),
            ("integrator.T", &self.t_final),
            ("output.stride", &self.stride),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, v)?;
            }
        }
        RunConfig::from_raw(&raw)
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Config file; only `verify.samples` is read, other known keys are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Suites to run (repeatable or comma-separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    /// Flip the sign of the curvature tensor (verification of the checks themselves).
    #[arg(long)]
    debug_flip_curvature: bool,
}

impl VerifyArgs {
    fn resolve(&self) -> Result<VerifyOptions, CliError> {
        let samples = match &self.config {
            Some(path) => RawConfig::load(path)?.verify_samples()?,
            None => None,
        };
        let suites = self
            .suite
            .iter()
            .map(|s| s.parse::<Suite>().map_err(CliError::Config))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VerifyOptions {
            suites,
            seed: self.seed,
            samples: samples.unwrap_or(VerifyOptions::default().samples),
            flip_curvature: self.debug_flip_curvature,
        })
    }
}

#[derive(Args)]
struct PlotArgs {
    /// `report.json` written by `compare`.
    report: PathBuf,
    /// Output file; defaults to `plotdata.txt` next to the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args.resolve()?),
        Command::Compare(args) => commands::compare(&args.resolve()?),
        Command::Verify(args) => commands::verify(&args.resolve()?, &args.out),
        Command::EmitPlotdata(args) => {
            commands::emit_plotdata(&args.report, args.out.as_deref()).map(|_| ())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("smflow: {e}");
        std::process::exit(e.exit_code());
    }
}
