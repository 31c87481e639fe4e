//! Dense two-phase tableau simplex.
//!
//! Phase 1 minimizes the total artificial mass and doubles as the feasibility
//! test for every QP. When a linear cost is supplied, phase 2 finishes the LP
//! and duals are read off the artificial columns.

use super::{InfeasibilityCertificate, Multipliers, QpProblem};

const PIVOT_EPS: f64 = 1e-10;
const REDUCED_COST_EPS: f64 = 1e-11;
/// Consecutive degenerate pivots after which Bland's rule takes over.
const DEGENERATE_STREAK: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    PivotLimit,
}

pub(super) struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub multipliers: Multipliers,
    pub certificate: InfeasibilityCertificate,
    pub pivots: usize,
}

struct Tableau {
    /// rows × (cols + 1); last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, p) in line.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, tj) in d.iter_mut().zip(&self.t[r][..self.cols]) {
                    *dj -= cb * tj;
                }
            }
        }
        d
    }

    /// Runs primal simplex on `cost` over columns allowed by `allowed`.
    /// Returns `Ok(pivots)` at optimality, `Err(status)` otherwise.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: impl Fn(usize) -> bool,
        pivot_cap: usize,
        pivots: &mut usize,
    ) -> Result<(), LpStatus> {
        let mut streak = 0usize;
        loop {
            let d = self.reduced_costs(cost);
            let bland = streak >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -REDUCED_COST_EPS;
            for j in (0..self.cols).filter(|&j| allowed(j)) {
                if self.basis.contains(&j) {
                    continue;
                }
                if d[j] < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d[j];
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(LpStatus::Unbounded);
            };
            if *pivots >= pivot_cap {
                return Err(LpStatus::PivotLimit);
            }
            self.pivot(row, col);
            *pivots += 1;
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
        }
    }
}

/// Feasibility (cost = None) or LP minimization of `cost · w`.
pub(super) fn solve(p: &QpProblem, cost: Option<&[f64]>, tol: f64) -> LpOutcome {
    let nw = p.dim();
    let neq = p.equalities().len();
    let nin = p.inequalities().len();
    let rows = neq + nin;
    let slack0 = nw;
    let art0 = nw + nin;
    let cols = nw + nin + rows;

    let mut sign = vec![1.0; rows];
    let mut t = vec![vec![0.0; cols + 1]; rows];
    for (r, row) in p.equalities().iter().chain(p.inequalities()).enumerate() {
        t[r][..nw].copy_from_slice(&row.coeffs);
        if r >= neq {
            t[r][slack0 + (r - neq)] = -1.0;
        }
        t[r][cols] = row.rhs;
        if row.rhs < 0.0 {
            sign[r] = -1.0;
            for v in t[r].iter_mut() {
                *v = -*v;
            }
        }
        t[r][art0 + r] = 1.0;
    }
    let mut tab = Tableau { t, basis: (art0..art0 + rows).collect(), cols };
    let pivot_cap = 50 * (rows + cols).max(10);
    let mut pivots = 0;

    let mut phase1_cost = vec![0.0; cols];
    for c in phase1_cost.iter_mut().skip(art0) {
        *c = 1.0;
    }
    let mut outcome = LpOutcome {
        status: LpStatus::Optimal,
        x: vec![0.0; nw],
        multipliers: Multipliers::default(),
        certificate: InfeasibilityCertificate::default(),
        pivots: 0,
    };
    if let Err(status) = tab.optimize(&phase1_cost, |_| true, pivot_cap, &mut pivots) {
        // Phase 1 is bounded below by zero; only the pivot cap can stop it.
        outcome.status = status;
        outcome.pivots = pivots;
        return outcome;
    }

    let residual: f64 = (0..rows).filter(|&r| tab.basis[r] >= art0).map(|r| tab.rhs(r).max(0.0)).sum();
    if residual > tol {
        let mut cert = InfeasibilityCertificate { residual, ..Default::default() };
        for r in 0..rows {
            if tab.basis[r] >= art0 && tab.rhs(r) > tol / rows as f64 {
                let original = tab.basis[r] - art0;
                if original < neq {
                    cert.equalities.push(original);
                } else {
                    cert.inequalities.push(original - neq);
                }
            }
        }
        cert.equalities.sort_unstable();
        cert.inequalities.sort_unstable();
        outcome.status = LpStatus::Infeasible;
        outcome.certificate = cert;
        outcome.pivots = pivots;
        return outcome;
    }

    // Drive zero-level artificials out of the basis where a structural column allows it.
    for r in 0..rows {
        if tab.basis[r] < art0 {
            continue;
        }
        let col = (0..art0)
            .filter(|j| !tab.basis.contains(j))
            .max_by(|&a, &b| tab.t[r][a].abs().total_cmp(&tab.t[r][b].abs()));
        if let Some(col) = col {
            if tab.t[r][col].abs() > 1e-7 {
                tab.pivot(r, col);
                pivots += 1;
            }
        }
    }

    if let Some(cost) = cost {
        let mut full_cost = vec![0.0; cols];
        full_cost[..nw].copy_from_slice(cost);
        if let Err(status) = tab.optimize(&full_cost, |j| j < art0, pivot_cap, &mut pivots) {
            outcome.status = status;
            outcome.pivots = pivots;
            return outcome;
        }
        let d = tab.reduced_costs(&full_cost);
        let y: Vec<f64> = (0..rows).map(|r| -d[art0 + r] * sign[r]).collect();
        let ineq = y[neq..].to_vec();
        let mut bounds = cost.to_vec();
        for (row, &yr) in p.equalities().iter().chain(p.inequalities()).zip(&y) {
            for k in 0..nw {
                bounds[k] -= row.coeffs[k] * yr;
            }
        }
        outcome.multipliers = Multipliers { eq: y[..neq].to_vec(), ineq, bounds };
    }

    for r in 0..rows {
        let b = tab.basis[r];
        if b < nw {
            outcome.x[b] = tab.rhs(r).max(0.0);
        }
    }
    outcome.pivots = pivots;
    outcome
}
