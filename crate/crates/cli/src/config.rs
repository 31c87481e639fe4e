//! Command-line surface. Every flag can also come from a JSON config file
//! (`--config`) whose keys are the flag names in snake_case; flags given on
//! the command line win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use classweight_core::baselines::{DeParams, Scheme};
use classweight_core::ensemble::MetricsReport;
use classweight_core::optimizer::{SolveOptions, Strategy};
use classweight_core::{HyperParams, DEFAULT_BIG_M, DEFAULT_EPSILON};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

pub const DEFAULT_LAMBDA: f64 = 0.95;
pub const DEFAULT_ALPHA: f64 = 0.85;
pub const DEFAULT_TUNE_STEP: f64 = 0.01;
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-6;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Parser)]
#[command(name = "classweight", version, about = "Optimal per-class weighting of classifier ensembles")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// JSON file supplying defaults for any flag (snake_case keys)
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Leave the generation timestamp out of every output file
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub no_timestamp: bool,
    /// Worker threads for the subset search (0 = all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Force a single worker
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select K classifiers and solve for their per-class weights
    Optimize(OptimizeArgs),
    /// Compute the reference weighting schemes
    Baselines(BaselinesArgs),
    /// Score a weight file on labelled predictions
    Evaluate(EvaluateArgs),
    /// Resample instance labels to a target class distribution
    Resample(ResampleArgs),
    /// Hill-climb λ then α on a validation metric
    Tune(TuneArgs),
    /// Compare the optimizer against every scheme over a range of K
    Sweep(SweepArgs),
    /// Check a weight file against every constraint
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Enumerate,
    BranchAndBound,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Enumerate => Strategy::Enumerate,
            StrategyArg::BranchAndBound => Strategy::BranchAndBound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    BalancedAccuracy,
    MacroPrecision,
    MacroRecall,
    MacroF1,
    MacroAuprc,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::BalancedAccuracy, Metric::MacroPrecision, Metric::MacroRecall, Metric::MacroF1, Metric::MacroAuprc];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::BalancedAccuracy => "balanced-accuracy",
            Metric::MacroPrecision => "macro-precision",
            Metric::MacroRecall => "macro-recall",
            Metric::MacroF1 => "macro-f1",
            Metric::MacroAuprc => "macro-auprc",
        }
    }

    pub fn of(&self, r: &MetricsReport) -> f64 {
        match self {
            Metric::BalancedAccuracy => r.balanced_accuracy,
            Metric::MacroPrecision => r.macro_precision,
            Metric::MacroRecall => r.macro_recall,
            Metric::MacroF1 => r.macro_f1,
            Metric::MacroAuprc => r.macro_auprc.unwrap_or(f64::NAN),
        }
    }
}

/// Objective knobs shared by the solving commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Regularization strength λ [default: 0.95]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// L1/L2 mix α [default: 0.85]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Strictness slack ε [default: 1e-6]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Big-M constant [default: 1e6]
    #[arg(long)]
    pub big_m: Option<f64>,
}

impl ModelArgs {
    pub fn params(&self, k: usize) -> HyperParams {
        HyperParams {
            k,
            lambda: self.lambda.unwrap_or(DEFAULT_LAMBDA),
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
            big_m: self.big_m.unwrap_or(DEFAULT_BIG_M),
        }
    }
}

/// Solver knobs shared by the solving commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Subset search [default: enumerate]
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// QP convergence tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Differential-evolution knobs.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DeArgs {
    /// Seed of the differential-evolution baseline [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Differential-evolution population size [default: 50]
    #[arg(long)]
    pub de_population: Option<usize>,
    /// Differential-evolution generations [default: 200]
    #[arg(long)]
    pub de_generations: Option<usize>,
}

impl DeArgs {
    pub fn params(&self) -> DeParams {
        let d = DeParams::default();
        DeParams {
            population_size: self.de_population.unwrap_or(d.population_size),
            max_generations: self.de_generations.unwrap_or(d.max_generations),
            rng_seed: self.seed.unwrap_or(d.rng_seed),
            ..d
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Accuracy matrix CSV
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
    /// Ensemble size
    #[arg(short, long)]
    pub k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Weight file to write
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report (standard output if omitted)
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BaselinesArgs {
    /// Accuracy matrix CSV
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
    /// Ensemble size; every classifier when omitted
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Comma-separated scheme names [default: all six]
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub de: DeArgs,
    /// Directory receiving `<scheme>.csv` and `summary.json`
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Weight file
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Predictions CSV
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// JSON report (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ResampleArgs {
    /// Labels CSV with header `instance_id,class`
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Class order (comma separated); first appearance when omitted
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Target imbalance ratio, majority fixed
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Number of minority classes (the last ones in class order) for a step distribution
    #[arg(long, requires = "step_ratio")]
    pub step_minority: Option<usize>,
    /// Imbalance ratio of the step distribution
    #[arg(long, requires = "step_minority")]
    pub step_ratio: Option<f64>,
    /// Explicit comma-separated target count per class
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<usize>>,
    /// Sampling seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Resampled instance list CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary of the achieved distribution (standard output if omitted)
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TuneArgs {
    /// Accuracy matrix CSV
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
    /// Validation predictions CSV scored at every step
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Ensemble size
    #[arg(short, long)]
    pub k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// λ step [default: 0.01]
    #[arg(long)]
    pub step_lambda: Option<f64>,
    /// α step [default: 0.01]
    #[arg(long)]
    pub step_alpha: Option<f64>,
    /// Metric to maximize [default: balanced-accuracy]
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    /// JSON report (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Weight file of the best setting
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Accuracy matrix CSV
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
    /// Test predictions CSV
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Smallest K [default: 2]
    #[arg(long)]
    pub k_min: Option<usize>,
    /// Largest K [default: n]
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Comma-separated scheme names [default: all six]
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Comma-separated metrics [default: all]
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub de: DeArgs,
    /// Improvement table CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report with every raw metric (standard output if omitted)
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Accuracy matrix CSV
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
    /// Weight file to check
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Ensemble size [default: number of selected rows]
    #[arg(short, long)]
    pub k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Violation tolerance [default: 1e-6]
    #[arg(long)]
    pub tol: Option<f64>,
    /// JSON report (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Top-level object of a config file.
pub fn load_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::config(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::parse(path, e.line() as u64, e.to_string())),
    }
}

/// Overlays the flags given on the command line onto the config file.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, file: &Map<String, Value>) -> Result<T> {
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::config(e.to_string()))? {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::config(format!("config: {e}")))
}

/// A value that must come from a flag or the config file.
pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value.clone().ok_or_else(|| CliError::config(format!("--{flag} is required")))
}

/// Like [`require`] for input files, which must also exist.
pub fn require_file(value: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    let path = require(value, flag)?;
    if !path.is_file() {
        return Err(CliError::config(format!("--{flag}: {} does not exist", path.display())));
    }
    Ok(path)
}

pub fn schemes(names: &Option<Vec<String>>, de: DeParams) -> Result<Vec<Scheme>> {
    match names {
        None => Ok(Scheme::all(de).to_vec()),
        Some(list) => list
            .iter()
            .map(|n| Scheme::from_name(n, de).ok_or_else(|| CliError::config(format!("unknown scheme `{n}`"))))
            .collect(),
    }
}

impl GlobalArgs {
    pub fn solve_options(&self, solver: &SolverArgs) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            workers: if self.deterministic { 1 } else { self.workers.unwrap_or(d.workers) },
            strategy: solver.strategy.map_or(d.strategy, Into::into),
            tol: solver.tol.unwrap_or(d.tol),
        }
    }
}
