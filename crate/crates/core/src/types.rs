//! Domain types shared by every module: the classifier and class sets, the
//! validation-accuracy matrix, hyper-parameters of the weighting program, the
//! solution matrices, prediction records and class distributions.
//!
//! Matrices are always addressed as (classifier row, class column).

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default lower-bound slack used to turn strict inequalities into non-strict ones.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Default big-M constant for the conditional "selected classifier carries weight" row.
pub const DEFAULT_BIG_M: f64 = 1e6;

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    Ok(())
}

/// Ordered, uniquely named set of classifiers. The order is the canonical row
/// order of every matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierSet {
    names: Vec<String>,
}

impl ClassifierSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Empty("classifier set"));
        }
        check_unique(&names)?;
        Ok(Self { names })
    }

    /// Generated names `C1..Cn`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| format!("C{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self { names: rows.iter().map(|&i| self.names[i].clone()).collect() }
    }
}

/// Whether a class describes normal operation or an abnormal event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassKind {
    Normal,
    Abnormal,
}

/// Ordered, uniquely named set of classes with a normal/abnormal partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    names: Vec<String>,
    kinds: Vec<ClassKind>,
}

impl ClassSet {
    pub fn new(classes: Vec<(String, ClassKind)>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Empty("class set"));
        }
        let (names, kinds): (Vec<_>, Vec<_>) = classes.into_iter().unzip();
        check_unique(&names)?;
        Ok(Self { names, kinds })
    }

    /// All classes abnormal except those listed in `normal`.
    pub fn with_normal<S: Into<String>>(names: impl IntoIterator<Item = S>, normal: &[&str]) -> Result<Self> {
        Self::new(
            names
                .into_iter()
                .map(Into::into)
                .map(|n: String| {
                    let kind = if normal.contains(&n.as_str()) { ClassKind::Normal } else { ClassKind::Abnormal };
                    (n, kind)
                })
                .collect(),
        )
    }

    /// Generated names `E1..Em`, all abnormal.
    pub fn numbered(m: usize) -> Result<Self> {
        Self::with_normal((1..=m).map(|j| format!("E{j}")), &[])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kind(&self, j: usize) -> ClassKind {
        self.kinds[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn normal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&j| self.kinds[j] == ClassKind::Normal)
    }

    pub fn abnormal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&j| self.kinds[j] == ClassKind::Abnormal)
    }
}

fn dense_from_rows(rows: &[Vec<f64>], context: &'static str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty(context));
    }
    let m = rows[0].len();
    if m == 0 {
        return Err(Error::Empty(context));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::ShapeMismatch { context, expected: (n, m), found: (i, row.len()) });
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context, row: i, col: j });
        }
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Mean validation accuracy of every classifier on every class.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    values: DMatrix<f64>,
    classifiers: ClassifierSet,
    classes: ClassSet,
}

impl AccuracyMatrix {
    /// Entries outside [0, 1] are rejected, never clamped.
    pub fn new(classifiers: ClassifierSet, classes: ClassSet, rows: &[Vec<f64>]) -> Result<Self> {
        let values = dense_from_rows(rows, "accuracy matrix")?;
        let expected = (classifiers.len(), classes.len());
        if values.shape() != expected {
            return Err(Error::ShapeMismatch { context: "accuracy matrix", expected, found: values.shape() });
        }
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                let value = values[(i, j)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::AccuracyOutOfRange { row: i, col: j, value });
                }
            }
        }
        Ok(Self { values, classifiers, classes })
    }

    /// Matrix with generated classifier and class names.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        Self::new(ClassifierSet::numbered(n)?, ClassSet::numbered(m)?, rows)
    }

    /// Number of classifiers.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of classes.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn classifiers(&self) -> &ClassifierSet {
        &self.classifiers
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| (0..self.m()).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Accuracy of classifier `i` averaged over classes.
    pub fn row_mean(&self, i: usize) -> f64 {
        (0..self.m()).map(|j| self.get(i, j)).sum::<f64>() / self.m() as f64
    }

    /// Uniform-over-all-classifiers accuracy of class `j`.
    pub fn column_mean(&self, j: usize) -> f64 {
        (0..self.n()).map(|i| self.get(i, j)).sum::<f64>() / self.n() as f64
    }

    /// Sum of every entry, accumulated row by row.
    pub fn total(&self) -> f64 {
        (0..self.n()).map(|i| (0..self.m()).map(|j| self.get(i, j)).sum::<f64>()).sum()
    }

    pub fn grand_mean(&self) -> f64 {
        self.total() / (self.n() * self.m()) as f64
    }

    /// Restriction to the given classifier rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let data: Vec<Vec<f64>> = rows.iter().map(|&i| (0..self.m()).map(|j| self.get(i, j)).collect()).collect();
        Self::new(self.classifiers.subset(rows), self.classes.clone(), &data)
    }
}

/// Knobs of the weighting program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    /// Ensemble size.
    pub k: usize,
    /// Overall regularization strength, λ ≥ 0.
    pub lambda: f64,
    /// L1/L2 mixing, α ∈ [0, 1].
    pub alpha: f64,
    pub epsilon: f64,
    pub big_m: f64,
}

impl HyperParams {
    pub fn new(k: usize, lambda: f64, alpha: f64) -> Self {
        Self { k, lambda, alpha, epsilon: DEFAULT_EPSILON, big_m: DEFAULT_BIG_M }
    }

    /// Effective coefficient on Σ w² once the objective is written as a
    /// maximization: λ(1−α)/2.
    pub fn quadratic_coefficient(&self) -> f64 {
        self.lambda * (1.0 - self.alpha) / 2.0
    }

    /// Checks every invariant against an ensemble of `n` classifiers.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::InvalidEnsembleSize { n, k: self.k });
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in [0, 1]", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must lie in (0, 1e-3]", self.epsilon)));
        }
        if !(self.big_m.is_finite() && self.big_m >= 1e3) {
            return Err(Error::InvalidParameter(format!("big_m = {} must be >= 1e3", self.big_m)));
        }
        Ok(())
    }
}

/// Binary selection flags, one per classifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SelectionVector(Vec<bool>);

impl SelectionVector {
    pub fn new(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn all(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn from_indices(n: usize, selected: &[usize]) -> Self {
        let mut flags = vec![false; n];
        for &i in selected {
            flags[i] = true;
        }
        Self(flags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&x| x).count()
    }

    /// Selected indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i]).collect()
    }
}

/// Classifier-class pair weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl Serialize for WeightMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl WeightMatrix {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self(DMatrix::zeros(n, m))
    }

    pub fn filled(n: usize, m: usize, value: f64) -> Self {
        Self(DMatrix::from_element(n, m, value))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        dense_from_rows(rows, "weight matrix").map(Self)
    }

    pub fn from_fn(n: usize, m: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(DMatrix::from_fn(n, m, f))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.0[(i, j)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.m()).map(|j| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.m()).map(|j| self.get(i, j)).sum()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n()).map(|i| self.get(i, j)).sum()
    }

    pub fn total(&self) -> f64 {
        (0..self.n()).map(|i| self.row_sum(i)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    /// Copies `sub` (rows indexed by `rows`) into an n×m zero matrix.
    pub fn embed(n: usize, rows: &[usize], sub: &WeightMatrix) -> Self {
        let mut full = Self::zeros(n, sub.m());
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..sub.m() {
                full.set(i, j, sub.get(r, j));
            }
        }
        full
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.m(), |r, j| self.get(rows[r], j))
    }
}

/// Decomposition of the weighting objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    /// (1/m) Σ w_ij v_ij
    pub accuracy_term: f64,
    /// Σ w_ij
    pub l1_term: f64,
    /// Σ w_ij²
    pub l2_term: f64,
    /// accuracy − λ(α·l1 + (1−α)/2·l2)
    pub total: f64,
}

/// Evaluates the regularized ensemble-accuracy objective.
pub fn objective_value(
    accuracy: &AccuracyMatrix,
    weights: &WeightMatrix,
    params: &HyperParams,
) -> Result<ObjectiveTerms> {
    let (n, m) = (accuracy.n(), accuracy.m());
    if weights.shape() != (n, m) {
        return Err(Error::ShapeMismatch { context: "objective weights", expected: (n, m), found: weights.shape() });
    }
    let mut weighted = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for i in 0..n {
        for j in 0..m {
            let w = weights.get(i, j);
            if !w.is_finite() {
                return Err(Error::NonFinite { context: "objective weights", row: i, col: j });
            }
            weighted += w * accuracy.get(i, j);
            l1 += w;
            l2 += w * w;
        }
    }
    let accuracy_term = weighted / m as f64;
    let total = accuracy_term - params.lambda * (params.alpha * l1 + (1.0 - params.alpha) / 2.0 * l2);
    Ok(ObjectiveTerms { accuracy_term, l1_term: l1, l2_term: l2, total })
}

/// One labelled test instance with every classifier's class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub true_class: usize,
    /// Row-major n×m block: `scores[i * m + j]` is classifier i's score for class j.
    pub scores: Vec<f64>,
}

impl PredictionRecord {
    pub fn score(&self, m: usize, i: usize, j: usize) -> f64 {
        self.scores[i * m + j]
    }

    /// Hard votes expanded to one-hot score rows.
    pub fn from_votes(instance_id: impl Into<String>, true_class: usize, votes: &[usize], m: usize) -> Self {
        let mut scores = vec![0.0; votes.len() * m];
        for (i, &vote) in votes.iter().enumerate() {
            scores[i * m + vote] = 1.0;
        }
        Self { instance_id: instance_id.into(), true_class, scores }
    }
}

/// Per-instance truth plus per-classifier class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    n: usize,
    m: usize,
    instances: Vec<PredictionRecord>,
}

impl PredictionSet {
    pub fn new(n: usize, m: usize, instances: Vec<PredictionRecord>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("classifier set"));
        }
        if m == 0 {
            return Err(Error::Empty("class set"));
        }
        for (r, rec) in instances.iter().enumerate() {
            if rec.true_class >= m {
                return Err(Error::UnknownClass { class: rec.true_class, m });
            }
            if rec.scores.len() != n * m {
                return Err(Error::ShapeMismatch {
                    context: "prediction scores",
                    expected: (n, m),
                    found: (r, rec.scores.len()),
                });
            }
            if let Some(k) = rec.scores.iter().position(|s| !s.is_finite()) {
                return Err(Error::NonFinite { context: "prediction scores", row: r, col: k });
            }
        }
        Ok(Self { n, m, instances })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[PredictionRecord] {
        &self.instances
    }

    pub fn true_labels(&self) -> Vec<usize> {
        self.instances.iter().map(|r| r.true_class).collect()
    }

    /// Keeps only the given classifier rows of every score block.
    pub fn select_classifiers(&self, rows: &[usize]) -> Self {
        let m = self.m;
        let instances = self
            .instances
            .iter()
            .map(|rec| PredictionRecord {
                instance_id: rec.instance_id.clone(),
                true_class: rec.true_class,
                scores: rows.iter().flat_map(|&i| rec.scores[i * m..(i + 1) * m].iter().copied()).collect(),
            })
            .collect();
        Self { n: rows.len(), m, instances }
    }
}

/// Instance counts per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDistribution {
    counts: Vec<usize>,
}

impl ClassDistribution {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("class distribution"));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidParameter("class distribution has no instances".into()));
        }
        Ok(Self { counts })
    }

    /// Counts labels `0..m`.
    pub fn from_labels(labels: &[usize], m: usize) -> Result<Self> {
        let mut counts = vec![0; m];
        for &label in labels {
            if label >= m {
                return Err(Error::UnknownClass { class: label, m });
            }
            counts[label] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Majority-class count divided by minority-class count.
pub fn imbalance_ratio(dist: &ClassDistribution) -> Result<f64> {
    if let Some(class) = dist.counts().iter().position(|&c| c == 0) {
        return Err(Error::UndefinedRatio { class });
    }
    let max = *dist.counts().iter().max().expect("non-empty");
    let min = *dist.counts().iter().min().expect("non-empty");
    Ok(max as f64 / min as f64)
}
