//! Exact selection and weighting of an ensemble.
//!
//! Every K-subset of classifiers fixes the binary variables and leaves a
//! convex QP in the weights of the selected rows. The default strategy
//! solves all C(n, K) of them; [`Strategy::BranchAndBound`] explores the
//! same space best-first using the selection-relaxed QP as a bound.

mod bnb;
mod subsets;
mod tune;
mod validate;

pub use subsets::{binomial, enumerate_subsets, Subsets, MAX_ENUMERATION_N};
pub use tune::{tune_hyperparams, TuneOutcome, TuneStep};
pub use validate::{validate_constraints, ConstraintCheck, ConstraintReport, Location};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qp::{self, KktResiduals, QpProblem, QpSolution, QpStatus, SolverOptions};
use crate::types::{objective_value, AccuracyMatrix, HyperParams, ObjectiveTerms, SelectionVector, WeightMatrix};

/// Objectives closer than this are treated as equal; the lexicographically
/// smaller subset wins.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Enumerate,
    BranchAndBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Worker threads for the subset solves; 0 uses the available parallelism.
    pub workers: usize,
    pub strategy: Strategy,
    /// QP convergence tolerance.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { workers: 0, strategy: Strategy::Enumerate, tol: qp::DEFAULT_TOL }
    }
}

/// Result of one subset subproblem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetOutcome {
    pub subset: Vec<usize>,
    pub status: QpStatus,
    /// Full regularized objective, when the subproblem was solved.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MipSolution {
    pub selection: SelectionVector,
    pub weights: WeightMatrix,
    pub objective: ObjectiveTerms,
    pub kkt: KktResiduals,
    /// Solved subsets by decreasing objective, then the rest in subset order.
    pub subset_rank: Vec<SubsetOutcome>,
}

/// Solves the selection/weighting program with default options.
pub fn solve_weighting(accuracy: &AccuracyMatrix, params: &HyperParams) -> Result<MipSolution> {
    solve_weighting_with(accuracy, params, &SolveOptions::default())
}

pub fn solve_weighting_with(
    accuracy: &AccuracyMatrix,
    params: &HyperParams,
    opts: &SolveOptions,
) -> Result<MipSolution> {
    params.validate(accuracy.n())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be > 0", opts.tol)));
    }
    match opts.strategy {
        Strategy::Enumerate => enumerate(accuracy, params, opts),
        Strategy::BranchAndBound => bnb::solve(accuracy, params, opts),
    }
}

/// The QP left once `subset` (sorted row indices) is fixed as the selection.
///
/// Variable `j·K + r` is the weight of classifier `subset[r]` on class `j`.
/// The L1 penalty is omitted because the column constraints fix Σw = m.
pub fn build_subset_qp(accuracy: &AccuracyMatrix, subset: &[usize], params: &HyperParams) -> QpProblem {
    let (m, k) = (accuracy.m(), subset.len());
    let dim = k * m;
    let var = |r: usize, j: usize| j * k + r;
    let linear = (0..dim).map(|idx| accuracy.get(subset[idx % k], idx / k) / m as f64).collect();
    let mut p = QpProblem::new(vec![params.quadratic_coefficient(); dim], linear);

    for j in 0..m {
        let mut row = vec![0.0; dim];
        for r in 0..k {
            row[var(r, j)] = 1.0;
        }
        p.push_equality(row, 1.0);
    }
    for r in 0..k {
        let mut row = vec![0.0; dim];
        for j in 0..m {
            row[var(r, j)] = 1.0;
        }
        p.push_at_least(row, params.epsilon);
    }
    let mut overall = vec![0.0; dim];
    for j in 0..m {
        let mut row = vec![0.0; dim];
        for r in 0..k {
            let v = accuracy.get(subset[r], j);
            row[var(r, j)] = v;
            overall[var(r, j)] = v / m as f64;
        }
        p.push_at_least(row, accuracy.column_mean(j) + params.epsilon);
    }
    p.push_at_least(overall, accuracy.grand_mean() + params.epsilon);
    p
}

/// Maps a subset QP solution back to a full n×m weight matrix.
pub fn subset_weights(n: usize, m: usize, subset: &[usize], w: &[f64]) -> WeightMatrix {
    let k = subset.len();
    let sub = WeightMatrix::from_fn(k, m, |r, j| w[j * k + r]);
    WeightMatrix::embed(n, subset, &sub)
}

pub(crate) struct Evaluated {
    pub subset: Vec<usize>,
    pub qp: QpSolution,
}

pub(crate) fn solve_subset(
    accuracy: &AccuracyMatrix,
    subset: Vec<usize>,
    params: &HyperParams,
    tol: f64,
) -> Result<Evaluated> {
    let p = build_subset_qp(accuracy, &subset, params);
    let qp = qp::solve_qp_with(&p, &SolverOptions { tol, ..SolverOptions::default() })?;
    Ok(Evaluated { subset, qp })
}

fn run_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Solver(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn enumerate(accuracy: &AccuracyMatrix, params: &HyperParams, opts: &SolveOptions) -> Result<MipSolution> {
    let subsets: Vec<Vec<usize>> = enumerate_subsets(accuracy.n(), params.k)?.collect();
    let results: Vec<Result<Evaluated>> = run_pool(opts.workers, || {
        subsets.into_par_iter().map(|s| solve_subset(accuracy, s, params, opts.tol)).collect()
    })?;
    let evaluated = results.into_iter().collect::<Result<Vec<_>>>()?;
    finish(accuracy, params, evaluated)
}

/// Picks the winner in subset order and assembles the solution record.
pub(crate) fn finish(
    accuracy: &AccuracyMatrix,
    params: &HyperParams,
    evaluated: Vec<Evaluated>,
) -> Result<MipSolution> {
    let (n, m) = (accuracy.n(), accuracy.m());
    let l1_constant = params.lambda * params.alpha * m as f64;
    let tried = evaluated.len();

    let mut best: Option<usize> = None;
    for (idx, e) in evaluated.iter().enumerate() {
        if !e.qp.is_optimal() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let incumbent = &evaluated[b];
                let diff = e.qp.objective - incumbent.qp.objective;
                diff > TIE_TOL || (diff.abs() <= TIE_TOL && e.subset < incumbent.subset)
            }
        };
        if better {
            best = Some(idx);
        }
    }

    let Some(best) = best else {
        if let Some(e) = evaluated.iter().find(|e| e.qp.status == QpStatus::MaxIterations) {
            return Err(Error::Solver(format!(
                "subset {:?} did not converge after {} iterations",
                e.subset, e.qp.iterations
            )));
        }
        return Err(Error::AllSubsetsInfeasible { k: params.k, tried });
    };

    let winner = &evaluated[best];
    let weights = subset_weights(n, m, &winner.subset, &winner.qp.w);
    let objective = objective_value(accuracy, &weights, params)?;
    let selection = SelectionVector::from_indices(n, &winner.subset);
    let kkt = winner.qp.kkt;

    let mut subset_rank: Vec<SubsetOutcome> = evaluated
        .into_iter()
        .map(|e| SubsetOutcome {
            objective: e.qp.is_optimal().then_some(e.qp.objective - l1_constant),
            status: e.qp.status,
            subset: e.subset,
        })
        .collect();
    subset_rank.sort_by(|a, b| match (a.objective, b.objective) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.subset.cmp(&b.subset)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.subset.cmp(&b.subset),
    });

    Ok(MipSolution { selection, weights, objective, kkt, subset_rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_classifier_is_infeasible() {
        let v = AccuracyMatrix::from_rows(&[vec![0.9]]).unwrap();
        let err = solve_weighting(&v, &HyperParams::new(1, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::AllSubsetsInfeasible { k: 1, tried: 1 }));
    }

    #[test]
    fn identical_classifiers_are_infeasible() {
        let v = AccuracyMatrix::from_rows(&[vec![0.7, 0.4], vec![0.7, 0.4], vec![0.7, 0.4]]).unwrap();
        for k in 1..=3 {
            assert!(matches!(
                solve_weighting(&v, &HyperParams::new(k, 0.5, 0.5)),
                Err(Error::AllSubsetsInfeasible { .. })
            ));
        }
    }

    #[test]
    fn weak_classifier_floored_at_epsilon() {
        let v = AccuracyMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let sol = solve_weighting(&v, &HyperParams::new(2, 0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(sol.weights.get(0, 0), 1.0 - 1e-6, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.weights.get(1, 0), 1e-6, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective.total, 1.0 - 1e-6, epsilon = 1e-9);
    }

    #[test]
    fn example_solution_is_conformant() {
        let v = fixtures::example_accuracy();
        for k in [2, 3, 8] {
            let p = HyperParams::new(k, 0.96, 0.80);
            let sol = solve_weighting(&v, &p).unwrap();
            assert_eq!(sol.selection.count(), k);
            let report = validate_constraints(&v, &sol.weights, &sol.selection, &p, 1e-6);
            assert!(report.is_conformant(), "K={k}: {:?}", report.violated().collect::<Vec<_>>());
            assert_eq!(sol.subset_rank.len() as u64, binomial(8, k));
        }
    }

    #[test]
    fn subset_qp_layout() {
        let v = fixtures::example_accuracy();
        let p = build_subset_qp(&v, &[1, 5], &HyperParams::new(2, 0.5, 0.5));
        assert_eq!(p.dim(), 10);
        assert_eq!(p.equalities().len(), 5);
        assert_eq!(p.inequalities().len(), 2 + 5 + 1);
        // variable j·K + r → classifier subset[r], class j
        assert_abs_diff_eq!(p.linear()[2 * 2 + 1], v.get(5, 2) / 5.0);
        assert_abs_diff_eq!(p.quad()[0], 0.125);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let v = fixtures::example_accuracy();
        let p = HyperParams::new(3, 0.95, 0.85);
        let one = solve_weighting_with(&v, &p, &SolveOptions { workers: 1, ..Default::default() }).unwrap();
        let four = solve_weighting_with(&v, &p, &SolveOptions { workers: 4, ..Default::default() }).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn branch_and_bound_agrees_with_enumeration() {
        let v = fixtures::example_accuracy();
        for k in [2, 4] {
            let p = HyperParams::new(k, 0.96, 0.80);
            let exact = solve_weighting(&v, &p).unwrap();
            let bb = solve_weighting_with(
                &v,
                &p,
                &SolveOptions { strategy: Strategy::BranchAndBound, ..Default::default() },
            )
            .unwrap();
            assert_eq!(exact.selection, bb.selection);
            assert_abs_diff_eq!(exact.objective.total, bb.objective.total, epsilon = 1e-7);
        }
    }

    #[test]
    fn ranking_is_sorted() {
        let v = fixtures::example_accuracy();
        let sol = solve_weighting(&v, &HyperParams::new(3, 0.95, 0.85)).unwrap();
        let objs: Vec<f64> = sol.subset_rank.iter().filter_map(|s| s.objective).collect();
        assert!(objs.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(sol.subset_rank[0].subset, sol.selection.indices());
        assert_abs_diff_eq!(objs[0], sol.objective.total, epsilon = 1e-9);
    }
}
