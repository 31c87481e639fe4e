//! Dense convex quadratic programming for the continuous weighting subproblem.
//!
//! Problems are stated as maximizations
//!
//! ```text
//! maximize    c·w − Σ_k q_k w_k²
//! subject to  A_eq w  = b_eq
//!             A_in w ≥ b_in
//!             w ≥ 0
//! ```
//!
//! with q ≥ 0. Feasibility is settled first by a phase-1 simplex; problems
//! with q = 0 are finished by the simplex, everything else by a primal-dual
//! interior point method with Mehrotra predictor-corrector steps.
//! [`grid_oracle`] is an exhaustive enumerator used to cross-check both.

mod ipm;
mod oracle;
mod simplex;

pub use oracle::{grid_oracle, grid_oracle_with_tol, ORACLE_MAX_VARIABLES};

use serde::Serialize;

use crate::error::{Error, Result};

/// Default convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default interior-point iteration cap.
pub const DEFAULT_MAX_ITER: usize = 200;

/// One linear constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn eval(&self, w: &[f64]) -> f64 {
        self.coeffs.iter().zip(w).map(|(a, x)| a * x).sum()
    }
}

/// A convex QP in the canonical form described at module level.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    quad: Vec<f64>,
    linear: Vec<f64>,
    equalities: Vec<LinearRow>,
    inequalities: Vec<LinearRow>,
}

impl QpProblem {
    pub fn new(quad: Vec<f64>, linear: Vec<f64>) -> Self {
        Self { quad, linear, equalities: Vec::new(), inequalities: Vec::new() }
    }

    /// Adds `coeffs · w = rhs`.
    pub fn equality(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.equalities.push(LinearRow { coeffs, rhs });
        self
    }

    /// Adds `coeffs · w ≥ rhs`.
    pub fn at_least(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.inequalities.push(LinearRow { coeffs, rhs });
        self
    }

    pub fn push_equality(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.equalities.push(LinearRow { coeffs, rhs });
    }

    pub fn push_at_least(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.inequalities.push(LinearRow { coeffs, rhs });
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn quad(&self) -> &[f64] {
        &self.quad
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn equalities(&self) -> &[LinearRow] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[LinearRow] {
        &self.inequalities
    }

    pub fn is_linear(&self) -> bool {
        self.quad.iter().all(|&q| q == 0.0)
    }

    /// c·w − Σ q w²
    pub fn objective(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.linear).zip(&self.quad).map(|((x, c), q)| c * x - q * x * x).sum()
    }

    /// Dimension, finiteness and convexity checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.linear.len();
        if n == 0 {
            return Err(Error::Empty("QP variables"));
        }
        if self.quad.len() != n {
            return Err(Error::ShapeMismatch {
                context: "QP quadratic diagonal",
                expected: (n, 1),
                found: (self.quad.len(), 1),
            });
        }
        for (index, &value) in self.quad.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { context: "QP quadratic diagonal", row: index, col: 0 });
            }
            if value < 0.0 {
                return Err(Error::NotConvex { index, value });
            }
        }
        if let Some(k) = self.linear.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { context: "QP linear coefficients", row: k, col: 0 });
        }
        for (context, rows) in [("QP equality rows", &self.equalities), ("QP inequality rows", &self.inequalities)] {
            for (r, row) in rows.iter().enumerate() {
                if row.coeffs.len() != n {
                    return Err(Error::ShapeMismatch { context, expected: (r, n), found: (r, row.coeffs.len()) });
                }
                if !row.rhs.is_finite() {
                    return Err(Error::NonFinite { context, row: r, col: n });
                }
                if let Some(k) = row.coeffs.iter().position(|a| !a.is_finite()) {
                    return Err(Error::NonFinite { context, row: r, col: k });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

/// Absolute KKT residuals of the minimization form `Σ q w² − c·w`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

/// Lagrange multipliers: `eq` for equality rows, `ineq` (≥ 0) for
/// inequality rows and `bounds` (≥ 0) for w ≥ 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Multipliers {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub bounds: Vec<f64>,
}

/// Which constraint rows phase 1 could not satisfy.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InfeasibilityCertificate {
    /// Minimal total artificial mass found by phase 1.
    pub residual: f64,
    pub equalities: Vec<usize>,
    pub inequalities: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    /// Maximization objective c·w − Σ q w² at `w`.
    pub objective: f64,
    pub status: QpStatus,
    pub kkt: KktResiduals,
    pub multipliers: Multipliers,
    pub certificate: Option<InfeasibilityCertificate>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    fn without_point(n: usize, status: QpStatus, iterations: usize) -> Self {
        Self {
            w: vec![0.0; n],
            objective: f64::NEG_INFINITY,
            status,
            kkt: KktResiduals::default(),
            multipliers: Multipliers::default(),
            certificate: None,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Evaluates the KKT conditions at `w` with the given multipliers.
pub fn kkt_residuals(p: &QpProblem, w: &[f64], mult: &Multipliers) -> KktResiduals {
    let n = p.dim();
    let mut grad: Vec<f64> = (0..n).map(|k| 2.0 * p.quad[k] * w[k] - p.linear[k]).collect();
    for (row, &y) in p.equalities.iter().zip(&mult.eq) {
        for k in 0..n {
            grad[k] -= row.coeffs[k] * y;
        }
    }
    for (row, &l) in p.inequalities.iter().zip(&mult.ineq) {
        for k in 0..n {
            grad[k] -= row.coeffs[k] * l;
        }
    }
    for k in 0..n {
        grad[k] -= mult.bounds.get(k).copied().unwrap_or(0.0);
    }
    let stationarity = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));

    let mut primal = 0.0f64;
    for row in &p.equalities {
        primal = primal.max((row.eval(w) - row.rhs).abs());
    }
    let mut complementarity = 0.0f64;
    for (r, row) in p.inequalities.iter().enumerate() {
        let slack = row.eval(w) - row.rhs;
        primal = primal.max(-slack);
        if let Some(&l) = mult.ineq.get(r) {
            complementarity = complementarity.max((l * slack).abs());
        }
    }
    for (k, &x) in w.iter().enumerate() {
        primal = primal.max(-x);
        if let Some(&z) = mult.bounds.get(k) {
            complementarity = complementarity.max((z * x).abs());
        }
    }
    let dual = mult.ineq.iter().chain(&mult.bounds).fold(0.0f64, |acc, &v| acc.max(-v));
    KktResiduals { stationarity, primal, dual, complementarity }
}

/// Solves `p` to tolerance `tol` with the default iteration cap.
pub fn solve_qp(p: &QpProblem, tol: f64) -> Result<QpSolution> {
    solve_qp_with(p, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn solve_qp_with(p: &QpProblem, opts: &SolverOptions) -> Result<QpSolution> {
    p.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be > 0", opts.tol)));
    }
    let n = p.dim();

    let lp = if p.is_linear() {
        simplex::solve(p, Some(&minimization_cost(p)), opts.tol)
    } else {
        simplex::solve(p, None, opts.tol)
    };
    match lp.status {
        simplex::LpStatus::Infeasible => {
            let mut sol = QpSolution::without_point(n, QpStatus::Infeasible, lp.pivots);
            sol.certificate = Some(lp.certificate);
            return Ok(sol);
        }
        simplex::LpStatus::Unbounded => {
            return Ok(QpSolution::without_point(n, QpStatus::Unbounded, lp.pivots));
        }
        simplex::LpStatus::PivotLimit => {
            return Ok(QpSolution::without_point(n, QpStatus::MaxIterations, lp.pivots));
        }
        simplex::LpStatus::Optimal => {}
    }

    if p.is_linear() {
        let kkt = kkt_residuals(p, &lp.x, &lp.multipliers);
        return Ok(QpSolution {
            objective: p.objective(&lp.x),
            w: lp.x,
            status: QpStatus::Optimal,
            kkt,
            multipliers: lp.multipliers,
            certificate: None,
            iterations: lp.pivots,
        });
    }

    let out = ipm::solve(p, opts);
    let kkt = kkt_residuals(p, &out.w, &out.multipliers);
    let status = if out.converged && kkt.max() <= opts.tol { QpStatus::Optimal } else { QpStatus::MaxIterations };
    Ok(QpSolution {
        objective: p.objective(&out.w),
        w: out.w,
        status,
        kkt,
        multipliers: out.multipliers,
        certificate: None,
        iterations: out.iterations,
    })
}

fn minimization_cost(p: &QpProblem) -> Vec<f64> {
    p.linear.iter().map(|c| -c).collect()
}
