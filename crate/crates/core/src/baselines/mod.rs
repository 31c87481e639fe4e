//! Reference weighting schemes the optimizer is compared against.
//!
//! `uw_pc`, `wa_pc` and `de_weights` produce column-stochastic matrices
//! (every class column sums to one); `uw_pcc`, `wa_pcc` and `bma_weights`
//! spread a total mass of one over the whole matrix. Argmax voting is
//! invariant to that global scale.

mod de;

pub use de::{de_run, de_weights, project_to_simplex, DeParams, DeRun};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::{enumerate_subsets, TIE_TOL};
use crate::types::{AccuracyMatrix, SelectionVector, WeightMatrix};

/// Uniform weight per classifier: 1/n everywhere.
pub fn uw_pc(n: usize, m: usize) -> Result<WeightMatrix> {
    check_dims(n, m)?;
    Ok(WeightMatrix::filled(n, m, 1.0 / n as f64))
}

/// Uniform weight per classifier-class pair: 1/(n·m) everywhere.
pub fn uw_pcc(n: usize, m: usize) -> Result<WeightMatrix> {
    check_dims(n, m)?;
    Ok(WeightMatrix::filled(n, m, 1.0 / (n * m) as f64))
}

/// Row-mean accuracy normalized over classifiers, shared by every class.
pub fn wa_pc(v: &AccuracyMatrix) -> Result<WeightMatrix> {
    let means: Vec<f64> = (0..v.n()).map(|i| v.row_mean(i)).collect();
    let total: f64 = means.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroAccuracy);
    }
    Ok(WeightMatrix::from_fn(v.n(), v.m(), |i, _| means[i] / total))
}

/// Each accuracy normalized by the sum of the whole matrix.
pub fn wa_pcc(v: &AccuracyMatrix) -> Result<WeightMatrix> {
    let total = v.total();
    if total <= 0.0 {
        return Err(Error::ZeroAccuracy);
    }
    Ok(WeightMatrix::from_fn(v.n(), v.m(), |i, j| v.get(i, j) / total))
}

/// Per-class posterior under a uniform prior with V as likelihood, scaled by 1/m.
pub fn bma_weights(v: &AccuracyMatrix) -> Result<WeightMatrix> {
    let (n, m) = (v.n(), v.m());
    let sums: Vec<f64> = (0..m).map(|j| (0..n).map(|i| v.get(i, j)).sum()).collect();
    if let Some(class) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroClassColumn { class });
    }
    Ok(WeightMatrix::from_fn(n, m, |i, j| v.get(i, j) / sums[j] / m as f64))
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("classifier set"));
    }
    if m == 0 {
        return Err(Error::Empty("class set"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    UwPc,
    UwPcc,
    WaPc,
    WaPcc,
    De(DeParams),
    Bma,
}

impl Scheme {
    /// All six schemes, DE with the given parameters.
    pub fn all(de: DeParams) -> [Scheme; 6] {
        [Scheme::UwPc, Scheme::UwPcc, Scheme::WaPc, Scheme::WaPcc, Scheme::De(de), Scheme::Bma]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::UwPc => "uw-pc",
            Scheme::UwPcc => "uw-pcc",
            Scheme::WaPc => "wa-pc",
            Scheme::WaPcc => "wa-pcc",
            Scheme::De(_) => "de",
            Scheme::Bma => "bma",
        }
    }

    pub fn from_name(name: &str, de: DeParams) -> Option<Scheme> {
        Scheme::all(de).into_iter().find(|s| s.name().eq_ignore_ascii_case(name))
    }

    pub fn weights(&self, v: &AccuracyMatrix) -> Result<WeightMatrix> {
        match self {
            Scheme::UwPc => uw_pc(v.n(), v.m()),
            Scheme::UwPcc => uw_pcc(v.n(), v.m()),
            Scheme::WaPc => wa_pc(v),
            Scheme::WaPcc => wa_pcc(v),
            Scheme::De(params) => de_weights(v, params),
            Scheme::Bma => bma_weights(v),
        }
    }
}

/// (1/m) Σ w_ij v_ij
pub fn weighted_accuracy(v: &AccuracyMatrix, w: &WeightMatrix) -> f64 {
    let mut sum = 0.0;
    for i in 0..v.n() {
        for j in 0..v.m() {
            sum += w.get(i, j) * v.get(i, j);
        }
    }
    sum / v.m() as f64
}

/// Runs `scheme` on every K-row subset of `v` and keeps the one with the best
/// weighted accuracy; ties go to the lexicographically smallest subset.
/// Subsets the scheme cannot weight (all-zero accuracies or an all-zero
/// class column) are skipped; their error is returned only if no subset
/// can be weighted.
pub fn baseline_with_selection(
    scheme: &Scheme,
    v: &AccuracyMatrix,
    k: usize,
) -> Result<(SelectionVector, WeightMatrix)> {
    let mut best: Option<(f64, Vec<usize>, WeightMatrix)> = None;
    let mut skipped = None;
    for subset in enumerate_subsets(v.n(), k)? {
        let sub = v.select_rows(&subset)?;
        let w = match scheme.weights(&sub) {
            Ok(w) => w,
            Err(e @ (Error::ZeroAccuracy | Error::ZeroClassColumn { .. })) => {
                skipped.get_or_insert(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let score = weighted_accuracy(&sub, &w);
        if best.as_ref().is_none_or(|(b, _, _)| score > b + TIE_TOL) {
            best = Some((score, subset, w));
        }
    }
    let Some((_, subset, w)) = best else {
        return Err(skipped.expect("every subset was skipped"));
    };
    Ok((SelectionVector::from_indices(v.n(), &subset), WeightMatrix::embed(v.n(), &subset, &w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, SVM};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_schemes() {
        assert!(uw_pc(8, 5).unwrap().rows().iter().flatten().all(|&w| w == 0.125));
        assert_eq!(uw_pc(1, 3).unwrap().get(0, 2), 1.0);
        assert!(uw_pcc(8, 5).unwrap().rows().iter().flatten().all(|&w| w == 0.025));
        assert!(uw_pcc(2, 2).unwrap().rows().iter().flatten().all(|&w| w == 0.25));
        assert!(uw_pc(0, 1).is_err());
    }

    #[test]
    fn wa_pc_on_example() {
        let w = wa_pc(&fixtures::example_accuracy()).unwrap();
        // SVM row mean 0.816 over a total of 6.686
        assert_abs_diff_eq!(w.get(SVM, 0), 0.816 / 6.686, epsilon = 1e-12);
        let v = AccuracyMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(wa_pc(&v).unwrap().row(0), vec![1.0, 1.0]);
        let zero = AccuracyMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(wa_pc(&zero), Err(Error::ZeroAccuracy));
    }

    #[test]
    fn wa_pcc_on_example() {
        let w = wa_pcc(&fixtures::example_accuracy()).unwrap();
        let expected = [0.76, 0.73, 0.89, 0.76, 0.94].map(|v| v / 33.43);
        for j in 0..5 {
            assert_abs_diff_eq!(w.get(SVM, j), expected[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn bma_on_small_cases() {
        let v = AccuracyMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        assert_eq!(bma_weights(&v).unwrap().rows(), vec![vec![1.0], vec![0.0]]);
        let v = AccuracyMatrix::from_rows(&[vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(bma_weights(&v), Err(Error::ZeroClassColumn { class: 1 }));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::all(DeParams::default()) {
            assert_eq!(Scheme::from_name(s.name(), DeParams::default()), Some(s));
        }
        assert_eq!(Scheme::from_name("nope", DeParams::default()), None);
    }

    #[test]
    fn selection_picks_the_strong_row() {
        let v = AccuracyMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        for s in Scheme::all(DeParams { max_generations: 20, ..DeParams::default() }) {
            let (x, w) = baseline_with_selection(&s, &v, 1).unwrap();
            assert_eq!(x.indices(), vec![0], "{}", s.name());
            assert_eq!(w.row_sum(1), 0.0);
        }
    }

    #[test]
    fn unweightable_everywhere_is_an_error() {
        let v = AccuracyMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(baseline_with_selection(&Scheme::Bma, &v, 1), Err(Error::ZeroClassColumn { class: 0 }));
    }

    #[test]
    fn full_selection_equals_plain_scheme() {
        let v = fixtures::example_accuracy();
        let (x, w) = baseline_with_selection(&Scheme::WaPcc, &v, 8).unwrap();
        assert_eq!(x, SelectionVector::all(8));
        assert_eq!(w, wa_pcc(&v).unwrap());
    }
}
