//! Shared inputs for the solver benchmarks.

use classweight_core::AccuracyMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An n×m accuracy matrix with entries drawn uniformly from [0.5, 1).
pub fn random_accuracy(n: usize, m: usize, seed: u64) -> AccuracyMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.5..1.0)).collect()).collect();
    AccuracyMatrix::from_rows(&rows).expect("entries lie in [0, 1]")
}
