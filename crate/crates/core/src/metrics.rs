//! Imbalance-aware classification metrics.

use log::warn;
use serde::Serialize;

use crate::ensemble;
use crate::error::{Error, Result};
use crate::types::{PredictionSet, WeightMatrix};

/// Entry (t, p) counts instances of true class t predicted as p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(m: usize) -> Self {
        Self { counts: vec![vec![0; m]; m] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let m = counts.len();
        if m == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        if let Some(t) = counts.iter().position(|row| row.len() != m) {
            return Err(Error::ShapeMismatch {
                context: "confusion matrix",
                expected: (m, m),
                found: (t, counts[t].len()),
            });
        }
        Ok(Self { counts })
    }

    pub fn from_labels(truth: &[usize], predicted: &[usize], m: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch {
                context: "labels vs predictions",
                expected: (truth.len(), 1),
                found: (predicted.len(), 1),
            });
        }
        let mut cm = Self::new(m);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let m = self.m();
        for class in [truth, predicted] {
            if class >= m {
                return Err(Error::UnknownClass { class, m });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Instances whose true class is `t`.
    pub fn support(&self, t: usize) -> u64 {
        self.counts[t].iter().sum()
    }

    /// Instances predicted as `p`.
    pub fn predicted(&self, p: usize) -> u64 {
        self.counts.iter().map(|row| row[p]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn require_support(&self) -> Result<()> {
        match (0..self.m()).find(|&t| self.support(t) == 0) {
            Some(class) => Err(Error::EmptyTrueClass { class }),
            None => Ok(()),
        }
    }
}

/// Mean of per-class recall.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(macro_prf(cm)?.recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub predicted: u64,
    /// Nothing was predicted as this class; precision is reported as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassPrf>,
}

pub fn macro_prf(cm: &ConfusionMatrix) -> Result<MacroPrf> {
    cm.require_support()?;
    let m = cm.m();
    let per_class: Vec<ClassPrf> = (0..m)
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let support = cm.support(c);
            let predicted = cm.predicted(c);
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = tp / support as f64;
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassPrf { precision, recall, f1, support, predicted, precision_undefined: predicted == 0 }
        })
        .collect();
    let mean = |f: fn(&ClassPrf) -> f64| per_class.iter().map(f).sum::<f64>() / m as f64;
    Ok(MacroPrf { precision: mean(|c| c.precision), recall: mean(|c| c.recall), f1: mean(|c| c.f1), per_class })
}

/// One point of a precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision-recall curve over the distinct scores, highest threshold first.
/// Tied scores enter together. `None` when there are no positives.
pub fn pr_curve(scores: &[f64], positive: &[bool]) -> Option<Vec<PrPoint>> {
    let total_pos = positive.iter().filter(|&&p| p).count();
    if total_pos == 0 || scores.len() != positive.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == threshold {
            if positive[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        points.push(PrPoint {
            threshold,
            recall: tp as f64 / total_pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    Some(points)
}

/// Trapezoidal area under the PR curve, anchored at recall 0 with the
/// precision of the highest threshold.
pub fn auprc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let curve = pr_curve(scores, positive)?;
    let mut prev = (0.0, curve[0].precision);
    let mut area = 0.0;
    for p in &curve {
        area += (p.recall - prev.0) * (p.precision + prev.1) / 2.0;
        prev = (p.recall, p.precision);
    }
    Some(area)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuprcSummary {
    /// Mean over the classes that occur in the truth.
    pub macro_auprc: f64,
    pub per_class: Vec<Option<f64>>,
    /// Classes with no true instances, left out of the mean.
    pub skipped: Vec<usize>,
}

/// One-vs-rest AUPRC per class from `scores[instance][class]`.
pub fn macro_auprc_from_scores(scores: &[Vec<f64>], truth: &[usize], m: usize) -> Result<AuprcSummary> {
    if scores.is_empty() {
        return Err(Error::Empty("prediction set"));
    }
    let mut per_class = Vec::with_capacity(m);
    let mut skipped = Vec::new();
    for j in 0..m {
        let column: Vec<f64> = scores.iter().map(|s| s[j]).collect();
        let positive: Vec<bool> = truth.iter().map(|&t| t == j).collect();
        let area = auprc(&column, &positive);
        if area.is_none() {
            warn!("class {j} has no true instances; left out of macro AUPRC");
            skipped.push(j);
        }
        per_class.push(area);
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Empty("classes present in the truth"));
    }
    Ok(AuprcSummary { macro_auprc: present.iter().sum::<f64>() / present.len() as f64, per_class, skipped })
}

/// Macro one-vs-rest AUPRC of the weighted ensemble on `preds`.
pub fn macro_auprc(preds: &PredictionSet, weights: &WeightMatrix) -> Result<AuprcSummary> {
    let outputs = ensemble::predict_set(weights, preds)?;
    let scores: Vec<Vec<f64>> = outputs.into_iter().map(|o| o.scores).collect();
    macro_auprc_from_scores(&scores, &preds.true_labels(), preds.m())
}

/// 100·(ours − other)/other
pub fn improvement_pct(ours: f64, other: f64) -> Result<f64> {
    if !(other > 0.0) || !ours.is_finite() || !other.is_finite() {
        return Err(Error::InvalidParameter(format!("improvement baseline {other} must be finite and > 0")));
    }
    Ok(100.0 * (ours - other) / other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn six_instance() -> ConfusionMatrix {
        // truth A A B B B C, predicted A B B B C C
        ConfusionMatrix::from_labels(&[0, 0, 1, 1, 1, 2], &[0, 1, 1, 1, 2, 2], 3).unwrap()
    }

    #[test]
    fn perfect_diagonal() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 1.0);
        let prf = macro_prf(&cm).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_built_example() {
        let cm = six_instance();
        assert_abs_diff_eq!(balanced_accuracy(&cm).unwrap(), (0.5 + 2.0 / 3.0 + 1.0) / 3.0, epsilon = 1e-12);
        let prf = macro_prf(&cm).unwrap();
        assert_abs_diff_eq!(prf.precision, (1.0 + 2.0 / 3.0 + 0.5) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prf.f1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn single_predicted_class() {
        let cm = ConfusionMatrix::from_labels(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        let prf = macro_prf(&cm).unwrap();
        assert_eq!(prf.recall, 0.5);
        assert!(prf.per_class[1].precision_undefined);
        assert_eq!(prf.per_class[1].precision, 0.0);
    }

    #[test]
    fn empty_true_class_is_an_error() {
        let cm = ConfusionMatrix::from_labels(&[0, 0], &[0, 1], 2).unwrap();
        assert_eq!(balanced_accuracy(&cm), Err(Error::EmptyTrueClass { class: 1 }));
    }

    #[test]
    fn auprc_hand_example() {
        let area = auprc(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert_abs_diff_eq!(area, 0.5 + 0.5 * (0.5 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn auprc_degenerate_curves() {
        assert_eq!(auprc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]), Some(1.0));
        assert_abs_diff_eq!(auprc(&[0.5; 4], &[true, false, false, false]).unwrap(), 0.25);
        assert_eq!(auprc(&[0.5, 0.4], &[false, false]), None);
    }

    #[test]
    fn macro_auprc_skips_absent_class() {
        let scores = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.8, 0.0]];
        let s = macro_auprc_from_scores(&scores, &[0, 1], 3).unwrap();
        assert_eq!(s.skipped, vec![2]);
        assert_eq!(s.macro_auprc, 1.0);
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement_pct(0.5, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(improvement_pct(1.02 * 0.7, 0.7).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(improvement_pct(0.990, 0.973).unwrap(), 1.747, epsilon = 1e-3);
        assert!(improvement_pct(0.5, 0.0).is_err());
    }
}
