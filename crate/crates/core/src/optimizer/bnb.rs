//! Best-first branch-and-bound over the selection flags.
//!
//! Each node fixes some x_i to 0 or 1 and bounds its subtree by the QP with
//! the remaining flags relaxed to [0, 1]. Leaves are scored with the same
//! subset QP the enumeration strategy uses, so both strategies agree.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use log::debug;

use super::{finish, solve_subset, Evaluated, MipSolution, SolveOptions, TIE_TOL};
use crate::error::Result;
use crate::qp::{self, QpProblem, QpStatus, SolverOptions};
use crate::types::{AccuracyMatrix, HyperParams};

/// Allowance for inexact relaxation objectives before a node is pruned.
const BOUND_SLACK: f64 = 1e-7;
const INTEGRAL_TOL: f64 = 1e-6;

struct Node {
    bound: f64,
    seq: usize,
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Relaxed QP over (w, x): w at `i·m + j`, x_i at `n·m + i`.
fn relaxation(accuracy: &AccuracyMatrix, params: &HyperParams, fixed: &[Option<bool>]) -> QpProblem {
    let (n, m) = (accuracy.n(), accuracy.m());
    let nw = n * m;
    let dim = nw + n;
    let w = |i: usize, j: usize| i * m + j;
    let x = |i: usize| nw + i;

    let mut quad = vec![params.quadratic_coefficient(); nw];
    quad.resize(dim, 0.0);
    let mut linear: Vec<f64> = (0..nw).map(|k| accuracy.get(k / m, k % m) / m as f64).collect();
    linear.resize(dim, 0.0);
    let mut p = QpProblem::new(quad, linear);

    for j in 0..m {
        let mut row = vec![0.0; dim];
        for i in 0..n {
            row[w(i, j)] = 1.0;
        }
        p.push_equality(row, 1.0);
    }
    let mut count = vec![0.0; dim];
    for i in 0..n {
        count[x(i)] = 1.0;
    }
    p.push_equality(count, params.k as f64);
    for (i, f) in fixed.iter().enumerate() {
        if let Some(on) = f {
            let mut row = vec![0.0; dim];
            row[x(i)] = 1.0;
            p.push_equality(row, if *on { 1.0 } else { 0.0 });
        }
    }

    for i in 0..n {
        let mut cap = vec![0.0; dim];
        let mut floor = vec![0.0; dim];
        let mut upper = vec![0.0; dim];
        for j in 0..m {
            cap[w(i, j)] = -1.0;
            floor[w(i, j)] = 1.0 / params.big_m;
        }
        cap[x(i)] = m as f64;
        floor[x(i)] = -1.0;
        upper[x(i)] = -1.0;
        p.push_at_least(cap, 0.0);
        p.push_at_least(floor, params.epsilon / params.big_m - 1.0);
        p.push_at_least(upper, -1.0);
    }
    let mut overall = vec![0.0; dim];
    for j in 0..m {
        let mut row = vec![0.0; dim];
        for i in 0..n {
            row[w(i, j)] = accuracy.get(i, j);
            overall[w(i, j)] = accuracy.get(i, j) / m as f64;
        }
        p.push_at_least(row, accuracy.column_mean(j) + params.epsilon);
    }
    p.push_at_least(overall, accuracy.grand_mean() + params.epsilon);
    p
}

/// The subset a node pins down, if its fixings leave no choice.
fn leaf_subset(fixed: &[Option<bool>], k: usize) -> Option<Vec<usize>> {
    let on = fixed.iter().filter(|f| **f == Some(true)).count();
    let off = fixed.iter().filter(|f| **f == Some(false)).count();
    if on == k {
        Some((0..fixed.len()).filter(|&i| fixed[i] == Some(true)).collect())
    } else if off == fixed.len() - k {
        Some((0..fixed.len()).filter(|&i| fixed[i] != Some(false)).collect())
    } else {
        None
    }
}

pub(super) fn solve(accuracy: &AccuracyMatrix, params: &HyperParams, opts: &SolveOptions) -> Result<MipSolution> {
    let n = accuracy.n();
    let m = accuracy.m();
    let solver = SolverOptions { tol: opts.tol, ..SolverOptions::default() };

    let mut evaluated: Vec<Evaluated> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut incumbent = f64::NEG_INFINITY;
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node { bound: f64::INFINITY, seq, fixed: vec![None; n] });
    let mut nodes = 0usize;

    let mut score_leaf = |subset: Vec<usize>, evaluated: &mut Vec<Evaluated>, incumbent: &mut f64| -> Result<()> {
        if !seen.insert(subset.clone()) {
            return Ok(());
        }
        let e = solve_subset(accuracy, subset, params, opts.tol)?;
        if e.qp.is_optimal() {
            *incumbent = incumbent.max(e.qp.objective);
        }
        evaluated.push(e);
        Ok(())
    };

    while let Some(node) = heap.pop() {
        if node.bound + BOUND_SLACK < incumbent - TIE_TOL {
            break;
        }
        nodes += 1;
        if let Some(subset) = leaf_subset(&node.fixed, params.k) {
            score_leaf(subset, &mut evaluated, &mut incumbent)?;
            continue;
        }

        let relaxed = qp::solve_qp_with(&relaxation(accuracy, params, &node.fixed), &solver)?;
        let bound = match relaxed.status {
            QpStatus::Infeasible => continue,
            QpStatus::Optimal => relaxed.objective,
            QpStatus::Unbounded | QpStatus::MaxIterations => f64::INFINITY,
        };
        if bound + BOUND_SLACK < incumbent - TIE_TOL {
            continue;
        }

        let xs: Vec<f64> = if relaxed.is_optimal() { relaxed.w[n * m..].to_vec() } else { vec![0.5; n] };
        let integral = xs.iter().all(|x| x.min(1.0 - x).abs() <= INTEGRAL_TOL);
        if integral {
            let subset: Vec<usize> = (0..n).filter(|&i| xs[i] > 0.5).collect();
            if subset.len() == params.k {
                score_leaf(subset, &mut evaluated, &mut incumbent)?;
            }
        }

        let free = (0..n).filter(|&i| node.fixed[i].is_none());
        let branch = free
            .map(|i| (i, xs[i].min(1.0 - xs[i])))
            .fold(None, |acc: Option<(usize, f64)>, (i, frac)| match acc {
                Some((_, best)) if best >= frac => acc,
                _ => Some((i, frac)),
            })
            .map(|(i, _)| i);
        let Some(i) = branch else { continue };
        for on in [true, false] {
            let mut fixed = node.fixed.clone();
            fixed[i] = Some(on);
            seq += 1;
            heap.push(Node { bound, seq, fixed });
        }
    }
    debug!("branch-and-bound explored {nodes} nodes, scored {} leaves", evaluated.len());

    evaluated.sort_by(|a, b| a.subset.cmp(&b.subset));
    finish(accuracy, params, evaluated)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves_recognised() {
        assert_eq!(leaf_subset(&[Some(true), None, Some(true)], 2), Some(vec![0, 2]));
        assert_eq!(leaf_subset(&[Some(false), None, None], 2), Some(vec![1, 2]));
        assert_eq!(leaf_subset(&[None, None, None], 2), None);
    }

    #[test]
    fn relaxation_dimensions() {
        let v = AccuracyMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        let p = relaxation(&v, &HyperParams::new(2, 0.5, 0.5), &[Some(true), None, None]);
        assert_eq!(p.dim(), 3 * 2 + 3);
        assert_eq!(p.equalities().len(), 2 + 1 + 1);
        assert_eq!(p.inequalities().len(), 3 * 3 + 2 + 1);
    }
}
