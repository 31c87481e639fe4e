use std::collections::BTreeMap;
use std::path::Path;

use classweight_core::baselines::{baseline_with_selection, weighted_accuracy, Scheme};
use classweight_core::ensemble::{evaluate, MetricsReport};
use classweight_core::metrics::improvement_pct;
use classweight_core::optimizer::{
    solve_weighting_with, tune_hyperparams, validate_constraints, ConstraintReport, MipSolution, SolveOptions, TuneStep,
};
use classweight_core::qp::{KktResiduals, QpStatus};
use classweight_core::sampling::{ratio_targets, resample, step_targets, ResamplePlan};
use classweight_core::{
    AccuracyMatrix, ClassDistribution, Error as CoreError, HyperParams, ObjectiveTerms, PredictionSet, SelectionVector,
    WeightMatrix,
};
use log::{info, warn};
use serde::Serialize;

use crate::config::{
    self, BaselinesArgs, EvaluateArgs, GlobalArgs, Metric, OptimizeArgs, ResampleArgs, SweepArgs, TuneArgs,
    ValidateArgs, DEFAULT_TUNE_STEP, DEFAULT_VALIDATION_TOL,
};
use crate::error::{CliError, Result};
use crate::io;

/// Settings every command shares.
#[derive(Debug, Clone)]
pub struct Context {
    pub stamp: Option<u64>,
    pub global: GlobalArgs,
}

impl Context {
    pub fn new(global: GlobalArgs) -> Self {
        Self { stamp: io::timestamp(!global.no_timestamp), global }
    }
}

fn names(v: &AccuracyMatrix, x: &SelectionVector) -> Vec<String> {
    x.indices().into_iter().map(|i| v.classifiers().names()[i].clone()).collect()
}

fn write_weights(ctx: &Context, path: &Path, v: &AccuracyMatrix, w: &WeightMatrix, x: &SelectionVector) -> Result<()> {
    io::write_weight_matrix(path, v.classifiers(), v.classes(), w, x, ctx.stamp)
}

fn read_model_predictions(path: &Path, v: &AccuracyMatrix) -> Result<PredictionSet> {
    io::read_predictions(path, v.classifiers(), v.classes())
}

#[derive(Debug, Serialize)]
pub struct SubsetSummary {
    pub classifiers: Vec<String>,
    pub status: QpStatus,
    pub objective: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct OptimizeReport {
    pub params: HyperParams,
    pub selected: Vec<String>,
    pub objective: ObjectiveTerms,
    pub kkt: KktResiduals,
    pub constraints: ConstraintReport,
    pub subsets: Vec<SubsetSummary>,
}

pub fn optimize(ctx: &Context, args: &OptimizeArgs) -> Result<OptimizeReport> {
    let v = io::read_accuracy_matrix(&config::require_file(&args.accuracy, "accuracy")?)?;
    let out = config::require(&args.out, "out")?;
    let params = args.model.params(config::require(&args.k, "k")?);
    let sol = solve_weighting_with(&v, &params, &ctx.global.solve_options(&args.solver))?;
    write_weights(ctx, &out, &v, &sol.weights, &sol.selection)?;
    let report = OptimizeReport {
        params,
        selected: names(&v, &sol.selection),
        objective: sol.objective,
        kkt: sol.kkt,
        constraints: validate_constraints(&v, &sol.weights, &sol.selection, &params, DEFAULT_VALIDATION_TOL),
        subsets: sol
            .subset_rank
            .iter()
            .map(|s| SubsetSummary {
                classifiers: s.subset.iter().map(|&i| v.classifiers().names()[i].clone()).collect(),
                status: s.status,
                objective: s.objective,
            })
            .collect(),
    };
    io::write_json(args.report.as_deref(), &report, ctx.stamp)?;
    info!("selected {:?}, objective {:.6}", report.selected, report.objective.total);
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct SchemeSummary {
    pub scheme: &'static str,
    pub selected: Vec<String>,
    pub weighted_accuracy: f64,
    pub file: String,
}

#[derive(Debug, Serialize)]
pub struct BaselinesReport {
    pub k: usize,
    pub schemes: Vec<SchemeSummary>,
}

pub fn baselines(ctx: &Context, args: &BaselinesArgs) -> Result<BaselinesReport> {
    let v = io::read_accuracy_matrix(&config::require_file(&args.accuracy, "accuracy")?)?;
    let dir = config::require(&args.out_dir, "out-dir")?;
    let k = args.k.unwrap_or(v.n());
    let mut summaries = Vec::new();
    for scheme in config::schemes(&args.schemes, args.de.params())? {
        let (x, w) = baseline_with_selection(&scheme, &v, k)?;
        let file = format!("{}.csv", scheme.name());
        write_weights(ctx, &dir.join(&file), &v, &w, &x)?;
        summaries.push(SchemeSummary {
            scheme: scheme.name(),
            selected: names(&v, &x),
            weighted_accuracy: weighted_accuracy(&v, &w),
            file,
        });
    }
    let report = BaselinesReport { k, schemes: summaries };
    io::write_json(Some(&dir.join("summary.json")), &report, ctx.stamp)?;
    Ok(report)
}

pub fn evaluate_weights(ctx: &Context, args: &EvaluateArgs) -> Result<MetricsReport> {
    let wf = io::read_weight_matrix(&config::require_file(&args.weights, "weights")?)?;
    let preds =
        io::read_predictions(&config::require_file(&args.predictions, "predictions")?, &wf.classifiers, &wf.classes)?;
    let report = evaluate(&wf.weights, &preds, &wf.classes)?;
    io::write_json(args.out.as_deref(), &report, ctx.stamp)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct ResampleReport {
    pub classes: Vec<String>,
    pub source_counts: Vec<usize>,
    pub targets: Vec<usize>,
    pub achieved_counts: Vec<usize>,
    pub source_ratio: Option<f64>,
    pub achieved_ratio: Option<f64>,
    pub seed: u64,
}

fn ratio(counts: &[usize]) -> Option<f64> {
    let min = *counts.iter().min()?;
    (min > 0).then(|| *counts.iter().max().expect("non-empty") as f64 / min as f64)
}

pub fn resample_labels(ctx: &Context, args: &ResampleArgs) -> Result<ResampleReport> {
    let labels =
        io::read_labels(&config::require_file(&args.labels, "labels")?, args.classes.as_deref().unwrap_or(&[]))?;
    let out = config::require(&args.out, "out")?;
    let m = labels.classes.len();
    let mut source = vec![0; m];
    for &l in &labels.labels {
        source[l] += 1;
    }
    let modes =
        [args.ratio.is_some(), args.step_minority.is_some() || args.step_ratio.is_some(), args.targets.is_some()];
    if modes.iter().filter(|&&b| b).count() != 1 {
        return Err(CliError::config("give exactly one of --ratio, --step-minority/--step-ratio or --targets"));
    }
    let plan = if let Some(rho) = args.ratio {
        ratio_targets(&ClassDistribution::new(source.clone())?, rho)?
    } else if let Some(targets) = &args.targets {
        if targets.len() != m {
            return Err(CliError::config(format!("--targets has {} counts for {m} classes", targets.len())));
        }
        ResamplePlan::new(targets.clone())
    } else {
        let r = config::require(&args.step_minority, "step-minority")?;
        let rho = config::require(&args.step_ratio, "step-ratio")?;
        step_targets(labels.labels.len(), m, r, rho)?
    };
    let seed = args.seed.unwrap_or(0);
    let plan = plan.with_seed(seed);
    let indices = resample(&labels.labels, &plan)?;
    io::write_indices(&out, &indices, &labels, ctx.stamp)?;

    let mut achieved = vec![0; m];
    for &i in &indices {
        achieved[labels.labels[i]] += 1;
    }
    let report = ResampleReport {
        classes: labels.classes.names().to_vec(),
        source_ratio: ratio(&source),
        achieved_ratio: ratio(&achieved),
        source_counts: source,
        targets: plan.targets.clone(),
        achieved_counts: achieved,
        seed,
    };
    io::write_json(args.summary.as_deref(), &report, ctx.stamp)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct TuneReport {
    pub metric: &'static str,
    pub start: (f64, f64),
    pub steps: (f64, f64),
    pub lambda: f64,
    pub alpha: f64,
    pub score: f64,
    pub selected: Vec<String>,
    pub objective: ObjectiveTerms,
    pub trace: Vec<TuneStep>,
}

pub fn tune(ctx: &Context, args: &TuneArgs) -> Result<TuneReport> {
    let v = io::read_accuracy_matrix(&config::require_file(&args.accuracy, "accuracy")?)?;
    let preds = read_model_predictions(&config::require_file(&args.predictions, "predictions")?, &v)?;
    let base = args.model.params(config::require(&args.k, "k")?);
    let metric = args.metric.unwrap_or(Metric::BalancedAccuracy);
    let steps = (args.step_lambda.unwrap_or(DEFAULT_TUNE_STEP), args.step_alpha.unwrap_or(DEFAULT_TUNE_STEP));
    // Surface metric errors (e.g. a class missing from the truth) before climbing.
    evaluate(&WeightMatrix::filled(v.n(), v.m(), 1.0), &preds, v.classes())?;

    let outcome = tune_hyperparams(
        &v,
        &base,
        (base.lambda, base.alpha),
        steps,
        &ctx.global.solve_options(&args.solver),
        |_, sol| evaluate(&sol.weights, &preds, v.classes()).map_or(f64::NEG_INFINITY, |r| metric.of(&r)),
    )?;
    if let Some(path) = &args.weights_out {
        write_weights(ctx, path, &v, &outcome.solution.weights, &outcome.solution.selection)?;
    }
    let report = TuneReport {
        metric: metric.name(),
        start: (base.lambda, base.alpha),
        steps,
        lambda: outcome.lambda,
        alpha: outcome.alpha,
        score: outcome.score,
        selected: names(&v, &outcome.solution.selection),
        objective: outcome.solution.objective,
        trace: outcome.trace,
    };
    io::write_json(args.out.as_deref(), &report, ctx.stamp)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct MethodResult {
    pub method: &'static str,
    pub selected: Vec<String>,
    pub weighted_accuracy: f64,
    pub metrics: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub feasible: bool,
    /// (1/(n·m)) Σ v, the accuracy of uniform weights on every classifier.
    pub uniform_accuracy: f64,
    pub mip: Option<MethodResult>,
    pub schemes: Vec<MethodResult>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub params: HyperParams,
    pub rows: Vec<SweepRow>,
}

fn method_result(
    method: &'static str,
    v: &AccuracyMatrix,
    preds: &PredictionSet,
    w: &WeightMatrix,
    x: &SelectionVector,
    metrics: &[Metric],
) -> Result<MethodResult> {
    let report = evaluate(w, preds, v.classes())?;
    Ok(MethodResult {
        method,
        selected: names(v, x),
        weighted_accuracy: weighted_accuracy(v, w),
        metrics: metrics.iter().map(|m| (m.name(), m.of(&report))).collect(),
    })
}

fn solve_or_skip(v: &AccuracyMatrix, params: &HyperParams, opts: &SolveOptions) -> Result<Option<MipSolution>> {
    match solve_weighting_with(v, params, opts) {
        Ok(sol) => Ok(Some(sol)),
        Err(e @ CoreError::AllSubsetsInfeasible { .. }) => {
            warn!("K={}: {e}", params.k);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn sweep(ctx: &Context, args: &SweepArgs) -> Result<SweepReport> {
    let v = io::read_accuracy_matrix(&config::require_file(&args.accuracy, "accuracy")?)?;
    let preds = read_model_predictions(&config::require_file(&args.predictions, "predictions")?, &v)?;
    let out = config::require(&args.out, "out")?;
    let (k_min, k_max) = (args.k_min.unwrap_or(2), args.k_max.unwrap_or(v.n()));
    if !(2 <= k_min && k_min <= k_max && k_max <= v.n()) {
        return Err(CliError::config(format!("K range {k_min}..={k_max} must lie within 2..={}", v.n())));
    }
    let schemes: Vec<Scheme> = config::schemes(&args.schemes, args.de.params())?;
    let metrics = args.metrics.clone().unwrap_or_else(|| Metric::ALL.to_vec());
    let opts = ctx.global.solve_options(&args.solver);
    let params = args.model.params(k_min);
    params.validate(v.n())?;
    let uniform_accuracy = v.grand_mean();

    let mut header = vec!["k".to_owned(), "metric".to_owned()];
    header.extend(schemes.iter().map(|s| s.name().to_owned()));
    let mut table = Vec::new();
    let mut rows = Vec::new();
    for k in k_min..=k_max {
        let p = HyperParams { k, ..params };
        let mip = match solve_or_skip(&v, &p, &opts)? {
            Some(sol) => Some(method_result("mip", &v, &preds, &sol.weights, &sol.selection, &metrics)?),
            None => None,
        };
        let mut results = Vec::with_capacity(schemes.len());
        for scheme in &schemes {
            let (x, w) = baseline_with_selection(scheme, &v, k)?;
            results.push(method_result(scheme.name(), &v, &preds, &w, &x, &metrics)?);
        }
        for metric in &metrics {
            let mut line = vec![k.to_string(), metric.name().to_owned()];
            for r in &results {
                let cell = mip
                    .as_ref()
                    .and_then(|ours| improvement_pct(ours.metrics[metric.name()], r.metrics[metric.name()]).ok())
                    .map_or_else(String::new, |pct| format!("{pct:.6}"));
                line.push(cell);
            }
            table.push(line);
        }
        rows.push(SweepRow { k, feasible: mip.is_some(), uniform_accuracy, mip, schemes: results });
    }
    if rows.iter().all(|r| !r.feasible) {
        return Err(CoreError::AllSubsetsInfeasible { k: k_max, tried: k_max - k_min + 1 }.into());
    }
    io::write_table(&out, &header, &table, ctx.stamp)?;
    let report = SweepReport { params, rows };
    io::write_json(args.report.as_deref(), &report, ctx.stamp)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub conformant: bool,
    pub params: HyperParams,
    pub objective: ObjectiveTerms,
    pub constraints: ConstraintReport,
}

/// Writes the report, then fails with [`CliError::Invalid`] unless every
/// constraint holds.
pub fn validate(ctx: &Context, args: &ValidateArgs) -> Result<ValidateReport> {
    let v = io::read_accuracy_matrix(&config::require_file(&args.accuracy, "accuracy")?)?;
    let wf = io::read_weight_matrix(&config::require_file(&args.weights, "weights")?)?;
    if wf.classifiers != *v.classifiers() || wf.classes.names() != v.classes().names() {
        return Err(CliError::config("weight file rows/columns do not match the accuracy matrix"));
    }
    let params = args.model.params(args.k.unwrap_or(wf.selection.count()));
    let constraints =
        validate_constraints(&v, &wf.weights, &wf.selection, &params, args.tol.unwrap_or(DEFAULT_VALIDATION_TOL));
    let report = ValidateReport {
        conformant: constraints.is_conformant(),
        params,
        objective: classweight_core::objective_value(&v, &wf.weights, &params)?,
        constraints,
    };
    io::write_json(args.out.as_deref(), &report, ctx.stamp)?;
    if !report.conformant {
        let failed: Vec<String> = report
            .constraints
            .violated()
            .map(|c| format!("({}) {} by {:.3e}", c.id, c.description, c.worst_violation))
            .collect();
        return Err(CliError::Invalid(failed.join("; ")));
    }
    Ok(report)
}

pub fn run(cli: config::Cli) -> Result<()> {
    let file = match &cli.global.config {
        Some(path) => config::load_config(path)?,
        None => Default::default(),
    };
    let global = config::resolve(&cli.global, &file)?;
    let ctx = Context::new(global);
    use config::Command::*;
    match &cli.command {
        Optimize(a) => optimize(&ctx, &config::resolve(a, &file)?).map(drop),
        Baselines(a) => baselines(&ctx, &config::resolve(a, &file)?).map(drop),
        Evaluate(a) => evaluate_weights(&ctx, &config::resolve(a, &file)?).map(drop),
        Resample(a) => resample_labels(&ctx, &config::resolve(a, &file)?).map(drop),
        Tune(a) => tune(&ctx, &config::resolve(a, &file)?).map(drop),
        Sweep(a) => sweep(&ctx, &config::resolve(a, &file)?).map(drop),
        Validate(a) => validate(&ctx, &config::resolve(a, &file)?).map(drop),
    }
}
