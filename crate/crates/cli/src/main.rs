//! `sloppy-baker`: experiments on the classical and quantum sloppy baker map.
//!
//! Every subcommand writes its data files into `--out` together with a
//! `manifest.json` holding the full configuration, crate versions and wall
//! time. Data files depend only on the configuration and seed.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
//! `BAKER_THREADS` overrides the worker-thread count.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const THREADS_ENV: &str = "BAKER_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "sloppy-baker", version, about = "Classical and quantum sloppy baker map experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: std::path::PathBuf,
    /// Data format for files that have both forms.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write a matplotlib script for every lattice grid.
    #[arg(long, global = true)]
    pub plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Baker step followed by the sloppy shift: `{D_b B, D'_t B}`.
    Sloppy,
    /// Momentum-half projection followed by the shift: `{D_b, D'_t}`.
    Shift,
    /// Plain momentum-half measurement: `{D_b, D_t}`.
    Measurement,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Frobenius-Perron evolution of a Gaussian density on an M x M grid.
    ClassicalEvolve(ClassicalEvolveArgs),
    /// Husimi snapshots of an evolved coherent state.
    QuantumEvolve(QuantumEvolveArgs),
    /// Husimi map of a coherent state or of a density matrix read from JSON.
    Husimi(HusimiArgs),
    /// Periodic orbits of period dividing T.
    Orbits(OrbitsArgs),
    /// Return probability R^T on the lattice or a strided window of it.
    ReturnProb(ReturnProbArgs),
    /// Superoperator spectrum.
    Spectrum(SpectrumArgs),
    /// Invariant state of a channel.
    Invariant(InvariantArgs),
    /// Mean entropy growth of Haar-random pure states.
    Entropy(EntropyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ChannelArgs {
    /// Hilbert-space dimension (even).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = ChannelKind::Sloppy)]
    pub channel: ChannelKind,
    /// Allow a non-integer momentum shift `N delta / 2` (experimental).
    #[arg(long)]
    pub fractional: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassicalEvolveArgs {
    /// Grid resolution (even).
    #[arg(long = "M", default_value_t = 256)]
    #[serde(rename = "M")]
    pub m: usize,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.25)]
    pub q0: f64,
    #[arg(long, default_value_t = 0.25)]
    pub p0: f64,
    /// Width of the initial Gaussian, matched to a coherent state of this dimension.
    #[arg(long = "N", default_value_t = 512)]
    #[serde(rename = "N")]
    pub n: usize,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,30")]
    pub steps: Vec<usize>,
    /// Split cells by overlap when the shift is not grid aligned.
    #[arg(long)]
    pub fractional: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct QuantumEvolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 0.25)]
    pub q0: f64,
    #[arg(long, default_value_t = 0.25)]
    pub p0: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,30")]
    pub steps: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct HusimiArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub q0: f64,
    #[arg(long, default_value_t = 0.25)]
    pub p0: f64,
    /// Density matrix in matrix JSON form; overrides the coherent state.
    #[arg(long)]
    pub state: Option<std::path::PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OrbitsArgs {
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: u32,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReturnProbArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: usize,
    /// Visit every `stride`-th lattice point along each axis.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Index window `a0:a1,b0:b1` (half open).
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    /// Largest N solved densely; above it only leading values are computed.
    #[arg(long, default_value_t = baker_core::spectral::DENSE_BOUND)]
    pub dense_bound: usize,
    /// Number of leading eigenvalues on the iterative path.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct InvariantArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = baker_core::spectral::INVARIANT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = baker_core::spectral::INVARIANT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 30)]
    pub tmax: usize,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub fractional: bool,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if threads == 0 {
        return Err(format!("{THREADS_ENV} must be a positive integer, got 0"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
