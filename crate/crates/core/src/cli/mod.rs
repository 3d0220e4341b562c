//! Command-line front end: `panel`, `fit`, `estimate`, `sweep`, `simulate`.
//!
//! Every command writes its data files plus a `<name>.manifest.json` into
//! `--out`. Data goes to files, diagnostics to stderr.

mod estimate;
mod fit;
pub mod output;
mod panel;
pub mod series;
mod simulate;
mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Result;
use crate::estimator::{Average, Target, DEFAULT_BINS, DEFAULT_MIN_COUNT};
use crate::hopkins::Scale;
use crate::rng::DEFAULT_SEED;
use crate::tailfit::{Grid, Method};
use output::{Run, SeedSource};

pub use estimate::EstimateArgs;
pub use fit::FitArgs;
pub use panel::PanelArgs;
pub use simulate::SimulateArgs;
pub use sweep::SweepArgs;

#[derive(Debug, Parser)]
#[command(name = "gibrat", version, about = "Tail fitting, growth-law estimation and simulation for balance snapshots")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Random seed [default: 20160123]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Draw the seed from the operating system; it is recorded in the manifest
    #[arg(long, global = true, conflicts_with = "seed")]
    pub entropy: bool,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Only report errors
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// Report progress and written files
    #[arg(short, long, global = true)]
    pub verbose: bool,
    /// Record wall-clock duration in the manifest (makes reruns differ)
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Join two snapshots into a transition panel and classify its scatter
    Panel(PanelArgs),
    /// Fit power-law and log-normal tails and compare them
    Fit(FitArgs),
    /// Bin a panel and estimate growth exponents per regime
    Estimate(EstimateArgs),
    /// Estimate over several horizons and test parameters for trends
    Sweep(SweepArgs),
    /// Simulate a population and write snapshots and a panel
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Panel(_) => "panel",
            Command::Fit(_) => "fit",
            Command::Estimate(_) => "estimate",
            Command::Sweep(_) => "sweep",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetArg {
    Ratio,
    Absolute,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Ratio => Target::Ratio,
            TargetArg::Absolute => Target::Absolute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageArg {
    Linear,
    Geometric,
}

impl From<AverageArg> for Average {
    fn from(a: AverageArg) -> Self {
        match a {
            AverageArg::Linear => Average::Linear,
            AverageArg::Geometric => Average::Geometric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    MonteCarlo,
    Asymptotic,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::MonteCarlo => Method::MonteCarlo,
            MethodArg::Asymptotic => Method::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridArg {
    /// `start`, then every multiple of the step above it
    Multiples,
    /// `start + k * step`
    Arithmetic,
}

impl From<GridArg> for Grid {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Multiples => Grid::Multiples,
            GridArg::Arithmetic => Grid::Arithmetic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleArg {
    Raw,
    Symlog,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Raw => Scale::Raw,
            ScaleArg::Symlog => Scale::SymLog,
        }
    }
}

/// Binning and regime settings shared by `estimate` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct BinFlags {
    /// Number of geometric bins between the smallest and largest s0
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Bins with fewer rows are dropped
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    /// How the regime threshold averages its two neighbouring bin centers
    #[arg(long, value_enum, default_value_t = AverageArg::Linear)]
    pub s_star_average: AverageArg,
}

/// Seed precedence: `--seed`, `--entropy`, then the config file, then the default.
pub(crate) fn resolve_seed(global: &Global, from_config: Option<u64>) -> (u64, SeedSource) {
    if let Some(s) = global.seed {
        (s, SeedSource::Flag)
    } else if global.entropy {
        (rand::random::<u64>(), SeedSource::Entropy)
    } else if let Some(s) = from_config {
        (s, SeedSource::Config)
    } else {
        (DEFAULT_SEED, SeedSource::Default)
    }
}

pub(crate) fn start_run(global: &Global, command: &'static str, stem: &str, args: &impl Serialize, config_seed: Option<u64>) -> Result<Run> {
    let (seed, source) = resolve_seed(global, config_seed);
    if source == SeedSource::Entropy {
        log::info!("seed {seed} drawn from entropy");
    }
    Run::new(&global.out, stem, command, seed, source, serde_json::to_value(args)?, global.timing)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Panel(a) => panel::run(&cli.global, a),
        Command::Fit(a) => fit::run(&cli.global, a),
        Command::Estimate(a) => estimate::run(&cli.global, a),
        Command::Sweep(a) => sweep::run(&cli.global, a),
        Command::Simulate(a) => simulate::run(&cli.global, a),
    }
}
