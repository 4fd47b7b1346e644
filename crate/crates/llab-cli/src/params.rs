//! Per-command parameters. Each struct is both the flag set of its subcommand
//! and the `params` object of a config file, so flag `--k-list` is key `k_list`.

use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use lindelof_lab::{MeanModel, Normalization};
use serde::{Deserialize, Serialize};

use crate::config::{config_err, CliError, Format};

fn is_false(b: &bool) -> bool {
    !*b
}

/// Flags shared by every subcommand; they map to the top-level config keys.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Directory receiving the outputs and manifest.json.
    #[arg(long = "output-dir", visible_alias = "out")]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelName {
    /// M(x) = a (x - x0).
    Linear,
    /// Logarithmic integral from 1.
    Li,
    /// Li(x) - Li(x^a).
    ShiftedLi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum NormName {
    LhEps,
    ProbBound,
    LhTilde,
}

impl NormName {
    pub fn norm(self) -> Normalization {
        match self {
            NormName::LhEps => Normalization::LhEps,
            NormName::ProbBound => Normalization::ProbBound,
            NormName::LhTilde => Normalization::LhTilde,
        }
    }
}

/// Builds a mean model; `a` and `x0` default to 1 and 0.
pub fn mean_model(model: Option<ModelName>, a: Option<f64>, x0: Option<f64>) -> Result<MeanModel, CliError> {
    Ok(match model.unwrap_or(ModelName::Linear) {
        ModelName::Linear => MeanModel::linear(a.unwrap_or(1.0), x0.unwrap_or(0.0))?,
        ModelName::Li => {
            if a.is_some() || x0.is_some() {
                return Err(config_err("model li takes neither a nor x0"));
            }
            MeanModel::log_integral()
        }
        ModelName::ShiftedLi => {
            if x0.is_some() {
                return Err(config_err("model shifted_li takes no x0"));
            }
            MeanModel::shifted_log_integral(a.ok_or_else(|| config_err("model shifted_li needs a"))?)?
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(group(ArgGroup::new("construction").required(true).args(["thm2", "mk", "density1"])))]
pub struct ConstructParams {
    /// Three-residue sequence n_j = 3j + delta_j with certified windows.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub thm2: bool,
    /// Block sequence keeping k of every m consecutive integers.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub mk: bool,
    /// Integers with deletions in windows [M, M/beta).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub density1: bool,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Window ends K, increasing.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Window starts M, increasing.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SamplerName {
    /// One point per quantile interval of the mean model.
    Quantile,
    /// Independent points per block of quantile intervals.
    Block,
    /// One uniform point per window around j/A.
    Window,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    #[arg(long, value_enum)]
    pub sampler: SamplerName,
    /// Number of points.
    #[arg(long)]
    pub j: u64,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelName>,
    /// Model slope, shift exponent, or the window sampler's A.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Block length factor: blocks hold at most c sqrt(j) points.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_c: Option<f64>,
    /// Window half-width factor K.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Run a Monte Carlo study with this many trials instead of one draw.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormName>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(group(ArgGroup::new("prime_source").required(true).args(["primes", "rational"])))]
pub struct BeurlingParams {
    /// Generalized primes, each > 1.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primes: Option<Vec<f64>>,
    /// Use the rational primes up to this bound.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational: Option<u64>,
    /// Largest generated integer X.
    #[arg(long)]
    pub cutoff: f64,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Abscissae for N, psi and pi; defaults to the cutoff.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ZetaMethodName {
    Series,
    Euler,
    Continued,
    LogDeriv,
    Perron,
    Template,
    CriticalLine,
    Convexity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PerronTarget {
    /// N(x), coefficients 1.
    Count,
    /// psi(x), coefficients log p.
    Psi,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaParams {
    #[arg(long, value_enum)]
    pub method: ZetaMethodName,
    /// Sequence file (binary or .csv) for series, continued, critical_line, convexity.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<PathBuf>,
    /// Use the integers 1..=n as the sequence.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integers: Option<u64>,
    /// System file written by `beurling`, for log_deriv and perron.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primes: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational: Option<u64>,
    /// Generation cutoff for primes/rational, or the prime cutoff of `euler`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    /// Truncation point of continued and log_deriv.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Density in N(u) = a u + O(u^theta).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Constant in N(u) <= tail_a u beyond the sequence; measured when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// c in pi(u) <= c u / log u for the Euler product tail.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_constant: Option<f64>,
    /// Perron abscissae; must avoid the terms.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_height: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PerronTarget>,
    /// Coefficient density beyond the system cutoff.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_density: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(group(ArgGroup::new("t_rule").required(true).args(["t_grid", "t_power"])))]
pub struct ScanParams {
    /// Sequence file (binary or .csv).
    #[arg(long)]
    pub sequence: PathBuf,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelName>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Use t = x^{1/b} at each x.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_power: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormName>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParams {
    /// Scan, critical-line or Monte Carlo CSV files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub inputs: Vec<PathBuf>,
}
