//! Exhaustive grid enumeration over the feasible box. Exponential in the
//! variable count; only meant to validate [`super::solve_qp`] on tiny problems.

use super::{KktResiduals, Multipliers, QpProblem, QpSolution, QpStatus};
use crate::error::{Error, Result};

pub const ORACLE_MAX_VARIABLES: usize = 8;

/// Best feasible point of the grid `{0, step, 2·step, …}ⁿ`, with rows checked
/// to tolerance `step`.
///
/// Branches whose optimistic objective or row activity cannot beat the
/// incumbent or reach a row's right-hand side are skipped; the result is the
/// same as visiting every grid point.
///
/// Every variable needs a finite upper bound implied by an equality row (or a
/// `≤` row) with non-negative coefficients. The last variable of an equality
/// row is solved for instead of gridded, so equality rows hold exactly.
pub fn grid_oracle(p: &QpProblem, step: f64) -> Result<QpSolution> {
    grid_oracle_with_tol(p, step, step)
}

/// [`grid_oracle`] with an explicit feasibility tolerance.
pub fn grid_oracle_with_tol(p: &QpProblem, step: f64, feas_tol: f64) -> Result<QpSolution> {
    p.validate()?;
    let n = p.dim();
    if n > ORACLE_MAX_VARIABLES {
        return Err(Error::ProblemTooLarge { vars: n, limit: ORACLE_MAX_VARIABLES });
    }
    if !(step > 0.0 && step.is_finite()) || !(feas_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("grid step {step} must be > 0")));
    }

    // Rows as (coeffs, rhs, is_equality); inequalities are `coeffs·w ≥ rhs`.
    let rows: Vec<(&[f64], f64, bool)> = p
        .equalities()
        .iter()
        .map(|r| (r.coeffs.as_slice(), r.rhs, true))
        .chain(p.inequalities().iter().map(|r| (r.coeffs.as_slice(), r.rhs, false)))
        .collect();

    let mut upper = vec![f64::INFINITY; n];
    for &(coeffs, rhs, is_eq) in &rows {
        // An equality with a ≥ 0, or an inequality −a·w ≥ −b with a ≥ 0, caps each w_k by b/a_k.
        let (sign, usable) =
            if is_eq { (1.0, coeffs.iter().all(|&a| a >= 0.0)) } else { (-1.0, coeffs.iter().all(|&a| a <= 0.0)) };
        if !usable {
            continue;
        }
        for k in 0..n {
            let a = sign * coeffs[k];
            if a > 0.0 {
                upper[k] = upper[k].min((sign * rhs).max(0.0) / a);
            }
        }
    }
    if let Some(index) = upper.iter().position(|u| !u.is_finite()) {
        return Err(Error::UnboundedVariable { index });
    }

    let last_var: Vec<Option<usize>> = rows.iter().map(|(c, _, _)| c.iter().rposition(|&a| a != 0.0)).collect();
    for (r, &(_, rhs, is_eq)) in rows.iter().enumerate() {
        // Rows without variables are checked once, up front.
        if last_var[r].is_none() {
            let ok = if is_eq { rhs.abs() <= feas_tol } else { 0.0 >= rhs - feas_tol };
            if !ok {
                return Ok(infeasible(n, 0));
            }
        }
    }
    let mut determined: Vec<Option<usize>> = vec![None; n];
    let mut check_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, last) in last_var.iter().enumerate() {
        if let Some(k) = *last {
            check_at[k].push(r);
            if rows[r].2 && determined[k].is_none() {
                determined[k] = Some(r);
            }
        }
    }
    let nonneg_eq: Vec<bool> = rows.iter().map(|(c, _, is_eq)| *is_eq && c.iter().all(|&a| a >= 0.0)).collect();

    // Each variable is bounded through the first non-negative equality row it
    // appears in; the rest only through their box.
    let group: Vec<Option<usize>> =
        (0..n).map(|k| (0..rows.len()).find(|&r| nonneg_eq[r] && rows[r].0[k] > 0.0)).collect();
    let mut members = vec![Vec::new(); rows.len()];
    for (k, g) in group.iter().enumerate() {
        if let Some(r) = g {
            members[*r].push(k);
        }
    }
    let mut free_suffix = vec![0.0; n + 1];
    let mut row_suffix = vec![vec![0.0; rows.len()]; n + 1];
    for k in (0..n).rev() {
        let u = upper[k] + feas_tol;
        free_suffix[k] = free_suffix[k + 1];
        if group[k].is_none() {
            free_suffix[k] += box_max(p.linear()[k], p.quad()[k], u);
        }
        for (r, &(coeffs, _, _)) in rows.iter().enumerate() {
            row_suffix[k][r] = row_suffix[k + 1][r] + coeffs[k].max(0.0) * u;
        }
    }

    let mut search = Search {
        p,
        free_suffix: &free_suffix,
        members: &members,
        row_suffix: &row_suffix,
        rows: &rows,
        upper: &upper,
        determined: &determined,
        check_at: &check_at,
        nonneg_eq: &nonneg_eq,
        step,
        tol: feas_tol,
        point: vec![0.0; n],
        partial: vec![vec![0.0; rows.len()]; n + 1],
        partial_obj: vec![0.0; n + 1],
        best: None,
        visited: 0,
    };
    search.descend(0);

    let visited = search.visited;
    Ok(match search.best {
        Some((objective, w)) => QpSolution {
            w,
            objective,
            status: QpStatus::Optimal,
            kkt: KktResiduals::default(),
            multipliers: Multipliers::default(),
            certificate: None,
            iterations: visited,
        },
        None => infeasible(n, visited),
    })
}

/// max of c·w − q·w² over 0 ≤ w ≤ u.
fn box_max(c: f64, q: f64, u: f64) -> f64 {
    let w = if q > 0.0 {
        (c / (2.0 * q)).clamp(0.0, u)
    } else if c > 0.0 {
        u
    } else {
        0.0
    };
    c * w - q * w * w
}

fn infeasible(n: usize, visited: usize) -> QpSolution {
    QpSolution {
        w: vec![0.0; n],
        objective: f64::NEG_INFINITY,
        status: QpStatus::Infeasible,
        kkt: KktResiduals::default(),
        multipliers: Multipliers::default(),
        certificate: None,
        iterations: visited,
    }
}

struct Search<'a> {
    p: &'a QpProblem,
    free_suffix: &'a [f64],
    members: &'a [Vec<usize>],
    row_suffix: &'a [Vec<f64>],
    rows: &'a [(&'a [f64], f64, bool)],
    upper: &'a [f64],
    determined: &'a [Option<usize>],
    check_at: &'a [Vec<usize>],
    nonneg_eq: &'a [bool],
    step: f64,
    tol: f64,
    point: Vec<f64>,
    /// partial[k][r] = Σ_{k' < k} a_rk' w_k'
    partial: Vec<Vec<f64>>,
    partial_obj: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
    visited: usize,
}

impl Search<'_> {
    /// Upper bound on the objective contributed by variables `d..n` given the
    /// row sums in `partial[d]`. Each grouped row uses the Lagrangian dual
    /// `μ·R + |μ|·tol + Σ max_box((c − μa)w − qw²)`, which bounds the row's
    /// optimum for any μ; μ is chosen by ternary search on the convex dual.
    fn remaining_bound(&self, d: usize) -> f64 {
        let mut total = self.free_suffix[d];
        for (r, vars) in self.members.iter().enumerate() {
            let start = vars.partition_point(|&k| k < d);
            let vars = &vars[start..];
            if vars.is_empty() {
                continue;
            }
            let (coeffs, rhs, _) = self.rows[r];
            let remaining = rhs - self.partial[d][r];
            let dual = |mu: f64| {
                mu * remaining
                    + mu.abs() * self.tol
                    + vars
                        .iter()
                        .map(|&k| {
                            box_max(self.p.linear()[k] - mu * coeffs[k], self.p.quad()[k], self.upper[k] + self.tol)
                        })
                        .sum::<f64>()
            };
            let (mut lo, mut hi) = vars.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
                let (c, a, q) = (self.p.linear()[k], coeffs[k], self.p.quad()[k]);
                let u = self.upper[k] + self.tol;
                (lo.min((c - 2.0 * q * u) / a), hi.max(c / a))
            });
            for _ in 0..40 {
                let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
                if dual(m1) <= dual(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            total += dual(lo).min(dual(hi)).min(dual(0.5 * (lo + hi)));
        }
        total
    }

    fn descend(&mut self, k: usize) {
        let n = self.point.len();
        if k == n {
            self.visited += 1;
            let value = self.p.objective(&self.point);
            if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
                self.best = Some((value, self.point.clone()));
            }
            return;
        }
        if let Some(r) = self.determined[k] {
            let (coeffs, rhs, _) = self.rows[r];
            let value = (rhs - self.partial[k][r]) / coeffs[k];
            if value < -self.tol || value > self.upper[k] + self.tol {
                return;
            }
            self.try_value(k, value.max(0.0));
        } else {
            let count = (self.upper[k] / self.step + 1e-9).floor() as usize;
            // High values first when they pay, so a strong incumbent appears early.
            let descending = self.p.linear()[k] > 0.0;
            for g in 0..=count {
                let g = if descending { count - g } else { g };
                self.try_value(k, g as f64 * self.step);
            }
        }
    }

    fn try_value(&mut self, k: usize, value: f64) {
        self.point[k] = value;
        let (head, tail) = self.partial.split_at_mut(k + 1);
        let next = &mut tail[0];
        for (r, &(coeffs, _, _)) in self.rows.iter().enumerate() {
            next[r] = head[k][r] + coeffs[k] * value;
        }
        for &r in &self.check_at[k] {
            let (_, rhs, is_eq) = self.rows[r];
            let ok = if is_eq { (next[r] - rhs).abs() <= self.tol } else { next[r] >= rhs - self.tol };
            if !ok {
                return;
            }
        }
        for (r, &nonneg) in self.nonneg_eq.iter().enumerate() {
            if nonneg && next[r] > self.rows[r].1 + self.tol {
                return;
            }
        }
        for (r, &(_, rhs, is_eq)) in self.rows.iter().enumerate() {
            if !is_eq && next[r] + self.row_suffix[k + 1][r] < rhs - self.tol {
                return;
            }
        }
        let (c, q) = (self.p.linear()[k], self.p.quad()[k]);
        let obj = self.partial_obj[k] + c * value - q * value * value;
        self.partial_obj[k + 1] = obj;
        if let Some((best, _)) = &self.best {
            if obj + self.remaining_bound(k + 1) + 1e-12 < *best {
                return;
            }
        }
        self.descend(k + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_variable_on_simplex() {
        let p = QpProblem::new(vec![0.0], vec![1.0]).equality(vec![1.0], 1.0);
        let sol = grid_oracle(&p, 0.01).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.w, vec![1.0]);
    }

    #[test]
    fn contradictory_rows_infeasible() {
        let p =
            QpProblem::new(vec![0.0, 0.0], vec![1.0, 1.0]).equality(vec![1.0, 1.0], 1.0).at_least(vec![1.0, 1.0], 2.0);
        assert_eq!(grid_oracle(&p, 0.01).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn floor_case_matches_solver() {
        let eps = 1e-6;
        let p = QpProblem::new(vec![0.0, 0.0], vec![1.0, 0.0])
            .equality(vec![1.0, 1.0], 1.0)
            .at_least(vec![1.0, 0.0], eps)
            .at_least(vec![0.0, 1.0], eps);
        let grid = grid_oracle(&p, 1e-3).unwrap();
        let exact = super::super::solve_qp(&p, 1e-8).unwrap();
        assert_abs_diff_eq!(grid.objective, exact.objective, epsilon = 1e-3);
    }

    #[test]
    fn too_many_variables_rejected() {
        let p = QpProblem::new(vec![0.0; 9], vec![1.0; 9]).equality(vec![1.0; 9], 1.0);
        assert!(matches!(grid_oracle(&p, 0.1), Err(Error::ProblemTooLarge { vars: 9, .. })));
    }

    #[test]
    fn unbounded_variable_rejected() {
        let p = QpProblem::new(vec![1.0, 1.0], vec![1.0, 1.0]).equality(vec![1.0, 0.0], 1.0);
        assert!(matches!(grid_oracle(&p, 0.1), Err(Error::UnboundedVariable { index: 1 })));
    }
}
