//! Reference data: the eight-classifier, five-class validation matrix used as
//! the worked weighting example, and the class distributions of the four
//! benchmark datasets and their resampled variants.

use crate::types::{AccuracyMatrix, ClassDistribution, ClassSet, ClassifierSet};

pub const EXAMPLE_CLASSIFIERS: [&str; 8] = ["MLR", "J48", "JRIP", "REPTree", "MLP", "SVM", "GNB", "IBk"];
pub const EXAMPLE_CLASSES: [&str; 5] = ["N1", "A1", "A2", "A3", "A4"];

const EXAMPLE_ROWS: [[f64; 5]; 8] = [
    [0.96, 0.92, 0.86, 0.99, 0.95],
    [0.89, 0.78, 0.85, 0.90, 0.90],
    [0.90, 0.74, 0.78, 0.89, 0.96],
    [0.76, 0.86, 0.80, 0.98, 0.73],
    [0.90, 0.92, 0.81, 0.71, 0.79],
    [0.76, 0.73, 0.89, 0.76, 0.94],
    [0.90, 0.85, 0.81, 0.71, 0.73],
    [0.90, 0.72, 0.75, 0.74, 0.71],
];

/// Row index of SVM in [`example_accuracy`].
pub const SVM: usize = 5;

/// Mean validation accuracy matrix of the intrusion-detection example
/// (two-decimal values).
pub fn example_accuracy() -> AccuracyMatrix {
    let rows: Vec<Vec<f64>> = EXAMPLE_ROWS.iter().map(|r| r.to_vec()).collect();
    AccuracyMatrix::new(
        ClassifierSet::new(EXAMPLE_CLASSIFIERS).expect("static names"),
        ClassSet::with_normal(EXAMPLE_CLASSES, &["N1"]).expect("static names"),
        &rows,
    )
    .expect("static fixture is valid")
}

/// LeakDB class counts (N1..N3, F1..F4).
pub const LEAKDB_COUNTS: [usize; 7] = [17520, 448438, 88154, 1721, 1181, 812, 74];
/// NSL-KDD class counts (N1, A1..A4).
pub const NSL_KDD_COUNTS: [usize; 5] = [13449, 2289, 9234, 11, 209];
/// SG-MITM class counts (N1, A1..A3).
pub const SG_MITM_COUNTS: [usize; 4] = [455, 84, 77, 81];
/// CIC-IDS2017 class counts (N1, A1..A3).
pub const CIC_IDS2017_COUNTS: [usize; 4] = [273097, 128027, 231073, 158930];

/// Resampled LeakDB distributions keyed by their imbalance ratio.
pub const LEAKDB_RESAMPLED: [(f64, [usize; 7]); 4] = [
    (1.00, [79700, 79700, 79700, 79700, 79700, 79700, 79700]),
    (3029.89, [17517, 448423, 88098, 1721, 1181, 812, 148]),
    (6059.97, [17520, 448438, 88154, 1721, 1181, 812, 74]),
    (12121.95, [17520, 448512, 88117, 1721, 1181, 812, 37]),
];

pub fn distribution(counts: &[usize]) -> ClassDistribution {
    ClassDistribution::new(counts.to_vec()).expect("static counts are valid")
}
