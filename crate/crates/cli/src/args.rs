use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Numerical Finsler geometry workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tensor components at sampled points.
    Eval(EvalArgs),
    /// Every predicate plus the theorem-level implications.
    Classify(ClassifyArgs),
    /// Projective fixture suite.
    Verify(VerifyArgs),
    /// Finite-difference audit of the jet engine.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MetricArgs {
    /// Catalog metric name.
    #[arg(long, conflicts_with = "config")]
    pub metric: Option<String>,
    /// TOML file with a [metric] table and optional [run] defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Parameter override NAME=VALUE; vectors as comma lists.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Jet orders KX,KY.
    #[arg(long)]
    pub orders: Option<String>,
    /// Tensor symbols (repeatable or comma-separated); all when omitted.
    #[arg(long = "tensor", value_delimiter = ',')]
    pub tensors: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub orders: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    /// Fixture names (repeatable or comma-separated); all when omitted.
    #[arg(long = "pair", value_delimiter = ',')]
    pub pairs: Vec<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub orders: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long = "tensor", value_delimiter = ',')]
    pub tensors: Vec<String>,
    /// Base finite-difference step.
    #[arg(long)]
    pub h0: Option<f64>,
    /// Richardson levels.
    #[arg(long)]
    pub levels: Option<usize>,
}
