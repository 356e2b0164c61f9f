//! `sqhard`: generate, verify, sample and test hard Gaussian-mixture
//! instances.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use commands::Failure;

#[derive(Parser)]
#[command(name = "sqhard", version, about = "Hard Gaussian-mixture instances for SQ lower bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an instance (core, smoothing, frame, planting), gate it and export it.
    Generate(GenerateArgs),
    /// Run the verification suite on an instance file.
    Verify(VerifyArgs),
    /// Draw a CSV dataset from an instance.
    Sample(SampleArgs),
    /// Run the moment-test and likelihood-ratio power curve.
    Experiment(ExperimentArgs),
    /// Render a JSON report as text, CSV or SVG.
    Report(ReportArgs),
    /// Lower-bound arithmetic from (gamma, beta, s).
    LowerBound(LowerBoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreKind {
    /// Explicit three-moment core for sqrt-k, LP otherwise.
    Auto,
    Explicit,
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PackKind {
    BatchedSvd,
    Frobenius,
}

#[derive(Args, Debug, Clone)]
pub struct GenerateArgs {
    /// TOML or JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["sqrt-k", "general-eps"])]
    pub mode: Option<String>,
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(short = 'd', long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub c_delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub core: Option<CoreKind>,
    /// LP weight floor (default 0.99/N).
    #[arg(long)]
    pub lp_alpha: Option<f64>,
    /// LP support size.
    #[arg(long)]
    pub lp_n: Option<usize>,
    /// Frames in the companion pack used for the lower-bound report (default 64; 0 skips it).
    #[arg(long)]
    pub pack_size: Option<usize>,
    #[arg(long, value_enum)]
    pub pack_method: Option<PackKind>,
    /// Packing exponent c for the batched construction.
    #[arg(long)]
    pub pack_c: Option<f64>,
    /// Instance file (default: instance.json in the output directory).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// Write the gate report here as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Export even if a gate fails.
    #[arg(long)]
    pub skip_gates: bool,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    /// Write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    pub tv_samples: usize,
    #[arg(long, default_value_t = 1_000)]
    pub pdf_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// Coordinates only.
    Blind,
    /// Coordinates plus the generating component.
    Keyed,
    /// Blind file at the output path and a keyed copy next to it.
    Both,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    pub instance: PathBuf,
    #[arg(short = 'n', long)]
    pub n: usize,
    /// Defaults to the sampling seed recorded in the instance.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Variant::Blind)]
    pub variant: Variant,
    /// CSV file (default: samples.csv in the output directory).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    /// TOML or JSON experiment config; defaults to the desk grid.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the alternative by the null.
    #[arg(long)]
    pub null_only: bool,
    /// Power-curve JSON (default: power.json in the output directory); a CSV
    /// is written next to it.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    /// Power curve, verification report or lower-bound report (JSON).
    pub input: PathBuf,
    /// Plot (power curves only); a CSV is written next to it unless --csv is given.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Print the text table (default when no other output is requested).
    #[arg(long)]
    pub text: bool,
}

#[derive(Args, Debug, Clone)]
pub struct LowerBoundArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(short = 's', long)]
    pub s: f64,
    /// Defaults to gamma.
    #[arg(long)]
    pub gamma_prime: Option<f64>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Report(a) => commands::report(&a),
        Command::LowerBound(a) => commands::lower_bound(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
