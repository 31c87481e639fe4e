//! Primal-dual interior point method with Mehrotra predictor-corrector steps.
//!
//! Works on the minimization form `½ wᵀH w + gᵀw` with `H = diag(2q)`,
//! `g = −c`. Inequalities get explicit slacks `s = A_in w − b_in ≥ 0`; the
//! reduced Newton system
//!
//! ```text
//! [ H + Z/W   −A_eqᵀ   −A_inᵀ ] [dw]
//! [ A_eq        0        0    ] [dy]
//! [ A_in        0       S/Λ   ] [dλ]
//! ```
//!
//! is factorized once per iteration and reused for both the affine and the
//! corrector solve.

use nalgebra::{DMatrix, DVector};

use super::{Multipliers, QpProblem, SolverOptions};

const STEP_FRACTION: f64 = 0.995;
const CENTERING: f64 = 0.5;

pub(super) struct IpmOutcome {
    pub w: Vec<f64>,
    pub multipliers: Multipliers,
    pub converged: bool,
    pub iterations: usize,
}

struct Iterate {
    w: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    lam: DVector<f64>,
    y: DVector<f64>,
}

struct Direction {
    dw: DVector<f64>,
    dz: DVector<f64>,
    ds: DVector<f64>,
    dlam: DVector<f64>,
    dy: DVector<f64>,
}

fn max_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, &d)| d < 0.0).map(|(&v, &d)| -v / d).fold(f64::INFINITY, f64::min)
}

fn step_length(it: &Iterate, d: &Direction) -> f64 {
    (STEP_FRACTION
        * max_step(&it.w, &d.dw)
            .min(max_step(&it.s, &d.ds))
            .min(max_step(&it.z, &d.dz))
            .min(max_step(&it.lam, &d.dlam)))
    .min(1.0)
}

/// Average complementarity after a step of length `alpha`.
fn mu_after(it: &Iterate, d: &Direction, alpha: f64, pairs: f64) -> f64 {
    ((&it.w + alpha * &d.dw).dot(&(&it.z + alpha * &d.dz)) + (&it.s + alpha * &d.ds).dot(&(&it.lam + alpha * &d.dlam)))
        / pairs
}

pub(super) fn solve(p: &QpProblem, opts: &SolverOptions) -> IpmOutcome {
    let (n, neq, nin) = (p.dim(), p.equalities().len(), p.inequalities().len());
    let h = DVector::from_iterator(n, p.quad().iter().map(|q| 2.0 * q));
    let g = DVector::from_iterator(n, p.linear().iter().map(|c| -c));
    let a_eq = DMatrix::from_fn(neq, n, |r, k| p.equalities()[r].coeffs[k]);
    let b_eq = DVector::from_iterator(neq, p.equalities().iter().map(|r| r.rhs));
    let a_in = DMatrix::from_fn(nin, n, |r, k| p.inequalities()[r].coeffs[k]);
    let b_in = DVector::from_iterator(nin, p.inequalities().iter().map(|r| r.rhs));

    let w0 = DVector::from_element(n, 1.0);
    let s0 = (&a_in * &w0 - &b_in).map(|v| v.max(1.0));
    let mut it = Iterate {
        w: w0,
        z: DVector::from_element(n, 1.0),
        s: s0,
        lam: DVector::from_element(nin, 1.0),
        y: DVector::zeros(neq),
    };
    let pairs = (n + nin) as f64;

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter;
        let rd = h.component_mul(&it.w) + &g - a_eq.tr_mul(&it.y) - a_in.tr_mul(&it.lam) - &it.z;
        let re = &a_eq * &it.w - &b_eq;
        let ri = &a_in * &it.w - &it.s - &b_in;
        let wz = it.w.component_mul(&it.z);
        let sl = it.s.component_mul(&it.lam);
        let mu = (wz.sum() + sl.sum()) / pairs;
        let comp_max = wz.iter().chain(sl.iter()).fold(0.0f64, |a, &b| a.max(b));
        if rd.amax() <= opts.tol * 0.1
            && re.amax() <= opts.tol * 0.1
            && ri.amax() <= opts.tol * 0.1
            && comp_max <= opts.tol * 0.1
        {
            converged = true;
            break;
        }

        let dim = n + neq + nin;
        let mut kkt = DMatrix::zeros(dim, dim);
        for k in 0..n {
            kkt[(k, k)] = h[k] + it.z[k] / it.w[k];
        }
        for r in 0..neq {
            for k in 0..n {
                kkt[(k, n + r)] = -a_eq[(r, k)];
                kkt[(n + r, k)] = a_eq[(r, k)];
            }
        }
        for r in 0..nin {
            for k in 0..n {
                kkt[(k, n + neq + r)] = -a_in[(r, k)];
                kkt[(n + neq + r, k)] = a_in[(r, k)];
            }
            kkt[(n + neq + r, n + neq + r)] = it.s[r] / it.lam[r];
        }
        let lu = kkt.lu();

        let solve_dir = |r_wz: &DVector<f64>, r_sl: &DVector<f64>| -> Option<Direction> {
            let mut rhs = DVector::zeros(dim);
            for k in 0..n {
                rhs[k] = -rd[k] - r_wz[k] / it.w[k];
            }
            for r in 0..neq {
                rhs[n + r] = -re[r];
            }
            for r in 0..nin {
                rhs[n + neq + r] = -ri[r] - r_sl[r] / it.lam[r];
            }
            let sol = lu.solve(&rhs)?;
            let dw = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, neq).into_owned();
            let dlam = sol.rows(n + neq, nin).into_owned();
            let dz = DVector::from_fn(n, |k, _| -(r_wz[k] + it.z[k] * dw[k]) / it.w[k]);
            let ds = DVector::from_fn(nin, |r, _| -(r_sl[r] + it.s[r] * dlam[r]) / it.lam[r]);
            if dw.iter().chain(dz.iter()).chain(ds.iter()).chain(dlam.iter()).any(|v| !v.is_finite()) {
                return None;
            }
            Some(Direction { dw, dz, ds, dlam, dy })
        };

        let Some(aff) = solve_dir(&wz, &sl) else {
            break;
        };
        let alpha_aff = max_step(&it.w, &aff.dw)
            .min(max_step(&it.s, &aff.ds))
            .min(max_step(&it.z, &aff.dz))
            .min(max_step(&it.lam, &aff.dlam))
            .min(1.0);
        let mu_aff = mu_after(&it, &aff, alpha_aff, pairs);
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let target = sigma * mu;
        let r_wz = DVector::from_fn(n, |k, _| wz[k] + aff.dw[k] * aff.dz[k] - target);
        let r_sl = DVector::from_fn(nin, |r, _| sl[r] + aff.ds[r] * aff.dlam[r] - target);
        let Some(mut dir) = solve_dir(&r_wz, &r_sl) else {
            break;
        };
        let mut alpha = step_length(&it, &dir);
        if mu_after(&it, &dir, alpha, pairs) > (1.0 - 0.1 * alpha) * mu {
            // The corrector overshot; take a damped, purely centered step.
            let r_wz = wz.map(|v| v - CENTERING * mu);
            let r_sl = sl.map(|v| v - CENTERING * mu);
            let Some(safe) = solve_dir(&r_wz, &r_sl) else {
                break;
            };
            dir = safe;
            alpha = step_length(&it, &dir);
            while alpha > 1e-12 && mu_after(&it, &dir, alpha, pairs) > (1.0 - 0.01 * alpha) * mu {
                alpha *= 0.5;
            }
        }
        it.w += alpha * &dir.dw;
        it.z += alpha * &dir.dz;
        it.s += alpha * &dir.ds;
        it.lam += alpha * &dir.dlam;
        it.y += alpha * &dir.dy;
        iterations = iter + 1;
    }

    IpmOutcome {
        w: it.w.iter().copied().collect(),
        multipliers: Multipliers {
            eq: it.y.iter().copied().collect(),
            ineq: it.lam.iter().copied().collect(),
            bounds: it.z.iter().copied().collect(),
        },
        converged,
        iterations,
    }
}
