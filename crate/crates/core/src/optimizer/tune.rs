//! Coordinate-wise hill climb over λ and then α.

use serde::Serialize;

use super::{solve_weighting_with, MipSolution, SolveOptions};
use crate::error::{Error, Result};
use crate::types::{AccuracyMatrix, HyperParams};

/// One evaluated (λ, α) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuneStep {
    pub lambda: f64,
    pub alpha: f64,
    pub score: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneOutcome {
    pub lambda: f64,
    pub alpha: f64,
    pub score: f64,
    pub solution: MipSolution,
    /// Every evaluation in the order it was made.
    pub trace: Vec<TuneStep>,
}

struct Climb<'a, F> {
    accuracy: &'a AccuracyMatrix,
    base: HyperParams,
    opts: &'a SolveOptions,
    score: F,
    trace: Vec<TuneStep>,
}

impl<F: FnMut(&HyperParams, &MipSolution) -> f64> Climb<'_, F> {
    fn evaluate(&mut self, lambda: f64, alpha: f64) -> Result<(f64, MipSolution)> {
        let params = HyperParams { lambda, alpha, ..self.base };
        let sol = solve_weighting_with(self.accuracy, &params, self.opts)?;
        let s = (self.score)(&params, &sol);
        self.trace.push(TuneStep { lambda, alpha, score: s, accepted: false });
        Ok((s, sol))
    }

    /// Walks one coordinate from `start`; `at(v)` maps it to (λ, α).
    fn walk(
        &mut self,
        start: f64,
        delta: f64,
        clip: (f64, f64),
        at: impl Fn(f64) -> (f64, f64),
        best: &mut (f64, MipSolution),
    ) -> Result<f64> {
        let mut current = start;
        for dir in [1.0, -1.0] {
            let mut moved = false;
            for k in 1.. {
                let candidate = (start + dir * k as f64 * delta).clamp(clip.0, clip.1);
                if candidate == current {
                    break;
                }
                let (lambda, alpha) = at(candidate);
                let (s, sol) = self.evaluate(lambda, alpha)?;
                if s > best.0 {
                    self.trace.last_mut().expect("just pushed").accepted = true;
                    *best = (s, sol);
                    current = candidate;
                    moved = true;
                } else {
                    break;
                }
            }
            if moved {
                break;
            }
        }
        Ok(current)
    }
}

/// Hill-climbs λ then α from `start` in increments of `steps`, keeping a
/// move only while `score` strictly improves. λ is kept ≥ 0 and α in [0, 1].
pub fn tune_hyperparams<F>(
    accuracy: &AccuracyMatrix,
    base: &HyperParams,
    start: (f64, f64),
    steps: (f64, f64),
    opts: &SolveOptions,
    score: F,
) -> Result<TuneOutcome>
where
    F: FnMut(&HyperParams, &MipSolution) -> f64,
{
    let (d_lambda, d_alpha) = steps;
    if !(d_lambda > 0.0 && d_alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("tuning steps {steps:?} must be > 0")));
    }
    let mut climb = Climb { accuracy, base: *base, opts, score, trace: Vec::new() };
    let (lambda0, alpha0) = (start.0.max(0.0), start.1.clamp(0.0, 1.0));

    let mut best = climb.evaluate(lambda0, alpha0)?;
    climb.trace[0].accepted = true;
    let lambda = climb.walk(lambda0, d_lambda, (0.0, f64::INFINITY), |l| (l, alpha0), &mut best)?;
    let alpha = climb.walk(alpha0, d_alpha, (0.0, 1.0), |a| (lambda, a), &mut best)?;

    let (score, solution) = best;
    Ok(TuneOutcome { lambda, alpha, score, solution, trace: climb.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn v() -> AccuracyMatrix {
        fixtures::example_accuracy()
    }

    #[test]
    fn flat_score_keeps_start() {
        let out = tune_hyperparams(
            &v(),
            &HyperParams::new(3, 0.0, 0.0),
            (0.95, 0.85),
            (0.01, 0.01),
            &SolveOptions::default(),
            |_, _| 1.0,
        )
        .unwrap();
        assert_eq!((out.lambda, out.alpha), (0.95, 0.85));
        // start, one probe each way for both coordinates
        assert_eq!(out.trace.len(), 5);
    }

    #[test]
    fn climbs_to_quadratic_peak() {
        let out = tune_hyperparams(
            &v(),
            &HyperParams::new(3, 0.0, 0.0),
            (0.3, 0.8),
            (0.1, 0.05),
            &SolveOptions::default(),
            |p, _| -(p.lambda - 0.5).powi(2),
        )
        .unwrap();
        assert_abs_diff_eq!(out.lambda, 0.5, epsilon = 1e-12);
        assert_eq!(out.alpha, 0.8);
        let lambdas: Vec<f64> = out.trace.iter().map(|s| s.lambda).collect();
        assert_abs_diff_eq!(lambdas[..4], [0.3, 0.4, 0.5, 0.6][..], epsilon = 1e-12);
    }

    #[test]
    fn descends_when_increase_hurts() {
        let out = tune_hyperparams(
            &v(),
            &HyperParams::new(2, 0.0, 0.0),
            (1.0, 0.5),
            (0.25, 0.25),
            &SolveOptions::default(),
            |p, _| -p.lambda - (p.alpha - 1.0).abs(),
        )
        .unwrap();
        assert_eq!(out.lambda, 0.0);
        assert_eq!(out.alpha, 1.0);
    }

    #[test]
    fn infeasibility_propagates() {
        let flat = AccuracyMatrix::from_rows(&[vec![0.5], vec![0.5]]).unwrap();
        let r = tune_hyperparams(
            &flat,
            &HyperParams::new(2, 0.0, 0.0),
            (0.5, 0.5),
            (0.1, 0.1),
            &SolveOptions::default(),
            |_, _| 0.0,
        );
        assert!(matches!(r, Err(Error::AllSubsetsInfeasible { .. })));
    }

    #[test]
    fn rejects_nonpositive_steps() {
        let r = tune_hyperparams(
            &v(),
            &HyperParams::new(2, 0.0, 0.0),
            (0.5, 0.5),
            (0.0, 0.1),
            &SolveOptions::default(),
            |_, _| 0.0,
        );
        assert!(r.is_err());
    }
}
