//! DE/rand/1/bin over per-classifier weight vectors on the probability simplex.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{AccuracyMatrix, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeParams {
    pub population_size: usize,
    pub max_generations: usize,
    /// Differential weight F.
    pub differential_weight: f64,
    /// Crossover rate CR.
    pub crossover_rate: f64,
    pub rng_seed: u64,
}

impl Default for DeParams {
    fn default() -> Self {
        Self { population_size: 50, max_generations: 200, differential_weight: 0.8, crossover_rate: 0.9, rng_seed: 42 }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidParameter(format!("DE population {} must be at least 4", self.population_size)));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "DE differential weight {} must lie in (0, 2]",
                self.differential_weight
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::InvalidParameter(format!(
                "DE crossover rate {} must lie in [0, 1]",
                self.crossover_rate
            )));
        }
        Ok(())
    }
}

/// Euclidean projection onto {w ≥ 0, Σw = 1}.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (idx, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (idx + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeRun {
    /// Best per-classifier weights found.
    pub weights: Vec<f64>,
    pub fitness: f64,
    /// Best fitness after initialization and after every generation.
    pub history: Vec<f64>,
}

/// Full DE run; fitness of w is (1/m) Σ_j Σ_i w_i v_ij.
pub fn de_run(v: &AccuracyMatrix, params: &DeParams) -> Result<DeRun> {
    params.validate()?;
    let n = v.n();
    let means: Vec<f64> = (0..n).map(|i| v.row_mean(i)).collect();
    let fitness = |w: &[f64]| w.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>();
    if n == 1 {
        let f = fitness(&[1.0]);
        return Ok(DeRun { weights: vec![1.0], fitness: f, history: vec![f] });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let np = params.population_size;
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| x / total).collect()
        })
        .collect();
    let mut scores: Vec<f64> = pop.iter().map(|w| fitness(w)).collect();

    let best_of = |scores: &[f64]| (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
    let mut history = Vec::with_capacity(params.max_generations + 1);
    history.push(scores[best_of(&scores)]);

    for _ in 0..params.max_generations {
        for target in 0..np {
            let picks = loop {
                let idx = sample(&mut rng, np, 3).into_vec();
                if !idx.contains(&target) {
                    break idx;
                }
            };
            let (a, b, c) = (&pop[picks[0]], &pop[picks[1]], &pop[picks[2]]);
            let forced = rng.random_range(0..n);
            let trial: Vec<f64> = (0..n)
                .map(|d| {
                    if d == forced || rng.random::<f64>() < params.crossover_rate {
                        a[d] + params.differential_weight * (b[d] - c[d])
                    } else {
                        pop[target][d]
                    }
                })
                .collect();
            let trial = project_to_simplex(&trial);
            let score = fitness(&trial);
            if score >= scores[target] {
                pop[target] = trial;
                scores[target] = score;
            }
        }
        history.push(scores[best_of(&scores)]);
    }

    let best = best_of(&scores);
    Ok(DeRun { weights: pop[best].clone(), fitness: scores[best], history })
}

/// DE weights broadcast to every class column.
pub fn de_weights(v: &AccuracyMatrix, params: &DeParams) -> Result<WeightMatrix> {
    let run = de_run(v, params)?;
    Ok(WeightMatrix::from_fn(v.n(), v.m(), |i, _| run.weights[i]))
}
