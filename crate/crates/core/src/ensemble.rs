//! Weighted voting: s_j = Σ_i w_ij · p_i(j), predicted class = argmax s_j.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{self, ClassPrf, ConfusionMatrix};
use crate::types::{ClassSet, PredictionSet, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleOutput {
    pub scores: Vec<f64>,
    pub predicted: usize,
    /// More than one class reached the top score; the lowest index won.
    pub tie: bool,
}

/// Class scores of one instance from its row-major n×m score block.
pub fn class_scores(weights: &WeightMatrix, scores: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = weights.shape();
    if scores.len() != n * m {
        return Err(Error::ShapeMismatch {
            context: "classifier scores",
            expected: (n, m),
            found: (scores.len() / m.max(1), scores.len() % m.max(1)),
        });
    }
    if let Some(k) = scores.iter().position(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "score of classifier {} for class {} is {}; scores must be finite and >= 0",
            k / m,
            k % m,
            scores[k]
        )));
    }
    Ok((0..m).map(|j| (0..n).map(|i| weights.get(i, j) * scores[i * m + j]).sum()).collect())
}

pub fn predict(weights: &WeightMatrix, scores: &[f64]) -> Result<EnsembleOutput> {
    let s = class_scores(weights, scores)?;
    let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let predicted = s.iter().position(|&v| v == top).unwrap_or(0);
    let tie = s.iter().filter(|&&v| v == top).count() > 1;
    Ok(EnsembleOutput { scores: s, predicted, tie })
}

/// [`predict`] for every instance, in instance order.
pub fn predict_set(weights: &WeightMatrix, preds: &PredictionSet) -> Result<Vec<EnsembleOutput>> {
    if weights.shape() != (preds.n(), preds.m()) {
        return Err(Error::ShapeMismatch {
            context: "weights vs predictions",
            expected: (preds.n(), preds.m()),
            found: weights.shape(),
        });
    }
    preds.instances().par_iter().map(|rec| predict(weights, &rec.scores)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    #[serde(flatten)]
    pub prf: ClassPrf,
    pub auprc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub instances: usize,
    pub balanced_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_auprc: Option<f64>,
    /// Classes without true instances, left out of the macro AUPRC.
    pub auprc_skipped: Vec<String>,
    /// Instances whose top score was shared by several classes.
    pub ties: usize,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

/// Predicts every instance and scores the ensemble.
pub fn evaluate(weights: &WeightMatrix, preds: &PredictionSet, classes: &ClassSet) -> Result<MetricsReport> {
    if preds.is_empty() {
        return Err(Error::Empty("prediction set"));
    }
    if classes.len() != preds.m() {
        return Err(Error::ShapeMismatch {
            context: "class set vs predictions",
            expected: (preds.m(), 1),
            found: (classes.len(), 1),
        });
    }
    let outputs = predict_set(weights, preds)?;
    let truth = preds.true_labels();
    let predicted: Vec<usize> = outputs.iter().map(|o| o.predicted).collect();
    let cm = ConfusionMatrix::from_labels(&truth, &predicted, preds.m())?;
    let prf = metrics::macro_prf(&cm)?;
    let scores: Vec<Vec<f64>> = outputs.iter().map(|o| o.scores.clone()).collect();
    let auprc = metrics::macro_auprc_from_scores(&scores, &truth, preds.m())?;

    let names = classes.names();
    Ok(MetricsReport {
        instances: preds.len(),
        balanced_accuracy: prf.recall,
        macro_precision: prf.precision,
        macro_recall: prf.recall,
        macro_f1: prf.f1,
        macro_auprc: Some(auprc.macro_auprc),
        auprc_skipped: auprc.skipped.iter().map(|&j| names[j].clone()).collect(),
        ties: outputs.iter().filter(|o| o.tie).count(),
        per_class: prf
            .per_class
            .into_iter()
            .zip(auprc.per_class)
            .enumerate()
            .map(|(j, (prf, auprc))| ClassMetrics { class: names[j].clone(), prf, auprc })
            .collect(),
        confusion: cm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PredictionRecord;

    #[test]
    fn single_classifier_follows_its_argmax() {
        let w = WeightMatrix::filled(1, 3, 1.0);
        let out = predict(&w, &[0.2, 0.5, 0.3]).unwrap();
        assert_eq!(out.predicted, 1);
        assert!(!out.tie);
    }

    #[test]
    fn heavier_hard_vote_wins() {
        let w = WeightMatrix::from_rows(&[vec![0.7, 0.7], vec![0.3, 0.3]]).unwrap();
        let votes = PredictionRecord::from_votes("x", 0, &[1, 0], 2);
        assert_eq!(predict(&w, &votes.scores).unwrap().predicted, 1);
    }

    #[test]
    fn all_zero_scores_tie_on_first_class() {
        let w = WeightMatrix::filled(2, 3, 0.5);
        let out = predict(&w, &[0.0; 6]).unwrap();
        assert_eq!((out.predicted, out.tie), (0, true));
    }

    #[test]
    fn bad_scores_rejected() {
        let w = WeightMatrix::filled(2, 2, 0.5);
        assert!(predict(&w, &[0.1, 0.2, 0.3]).is_err());
        assert!(predict(&w, &[0.1, -0.2, 0.3, 0.4]).is_err());
        assert!(predict(&w, &[0.1, f64::NAN, 0.3, 0.4]).is_err());
    }

    #[test]
    fn perfect_predictions_score_one() {
        let recs: Vec<_> = [0, 1, 1, 0, 1]
            .iter()
            .enumerate()
            .map(|(k, &t)| PredictionRecord::from_votes(k.to_string(), t, &[t, t], 2))
            .collect();
        let set = PredictionSet::new(2, 2, recs).unwrap();
        let report = evaluate(&WeightMatrix::filled(2, 2, 0.5), &set, &ClassSet::numbered(2).unwrap()).unwrap();
        assert_eq!(report.balanced_accuracy, 1.0);
        assert_eq!(report.macro_auprc, Some(1.0));
        assert_eq!(report.ties, 0);
    }
}
