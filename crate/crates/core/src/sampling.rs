//! Label-level dataset utilities: stratified folds, random re-sampling to
//! target class counts, and generators for target distributions.

use log::warn;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::ClassDistribution;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index of every instance.
    pub folds: Vec<usize>,
    /// Classes with fewer instances than folds.
    pub small_classes: Vec<usize>,
}

impl FoldAssignment {
    /// Instances of fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == f).collect()
    }
}

fn class_members(labels: &[usize]) -> Vec<Vec<usize>> {
    let m = labels.iter().max().map_or(0, |&c| c + 1);
    let mut members = vec![Vec::new(); m];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    members
}

/// Shuffles each class (seeded) and deals it round-robin over `k` folds. The
/// dealing position carries over from one class to the next so that classes
/// smaller than `k` do not all land in fold 0.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count {k} must be at least 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut small_classes = Vec::new();
    let mut offset = 0;
    for (class, mut members) in class_members(labels).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            warn!("class {class} has {} instances for {k} folds", members.len());
            small_classes.push(class);
        }
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = (offset + pos) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldAssignment { k, folds, small_classes })
}

/// Target count per class plus the seed used to draw instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResamplePlan {
    pub targets: Vec<usize>,
    pub rng_seed: u64,
}

impl ResamplePlan {
    pub fn new(targets: Vec<usize>) -> Self {
        Self { targets, rng_seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn total(&self) -> usize {
        self.targets.iter().sum()
    }

    /// Largest over smallest target; `None` if a target is zero.
    pub fn achieved_ratio(&self) -> Option<f64> {
        let min = *self.targets.iter().min()?;
        let max = *self.targets.iter().max()?;
        (min > 0).then(|| max as f64 / min as f64)
    }
}

/// Instance indices hitting `plan.targets` exactly: classes above target are
/// undersampled without replacement, classes below keep every instance and
/// draw the rest with replacement. Output is grouped by class.
pub fn resample(labels: &[usize], plan: &ResamplePlan) -> Result<Vec<usize>> {
    let m = plan.targets.len();
    if let Some(&class) = labels.iter().find(|&&c| c >= m) {
        return Err(Error::UnknownClass { class, m });
    }
    let mut members = class_members(labels);
    members.resize(m, Vec::new());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
    let mut out = Vec::with_capacity(plan.total());
    for (class, (have, &target)) in members.iter().zip(&plan.targets).enumerate() {
        if have.is_empty() && target > 0 {
            return Err(Error::AbsentClass { class, target });
        }
        if have.len() >= target {
            let mut picked: Vec<usize> = sample(&mut rng, have.len(), target).into_iter().map(|p| have[p]).collect();
            picked.sort_unstable();
            out.extend(picked);
        } else {
            out.extend_from_slice(have);
            out.extend((have.len()..target).map(|_| have[rng.random_range(0..have.len())]));
        }
    }
    Ok(out)
}

fn unreachable(rho: f64, reason: impl Into<String>) -> Error {
    Error::UnreachableRatio { rho, reason: reason.into() }
}

/// Plan reaching imbalance ratio `rho` with the same total.
///
/// ρ = 1 spreads the total evenly (remainder to the first classes). Otherwise
/// the majority class stays fixed, the minority is set to round(majority/ρ)
/// and the second-largest class absorbs the difference.
pub fn ratio_targets(dist: &ClassDistribution, rho: f64) -> Result<ResamplePlan> {
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(Error::InvalidParameter(format!("target ratio {rho} must be >= 1")));
    }
    let counts = dist.counts();
    let m = counts.len();
    let total = dist.total();
    if rho == 1.0 {
        let (base, extra) = (total / m, total % m);
        return Ok(ResamplePlan::new((0..m).map(|j| base + usize::from(j < extra)).collect()));
    }
    if m < 3 {
        return Err(unreachable(rho, "needs a third class to absorb the difference"));
    }

    let by_size = |pick_max: bool| {
        (0..m)
            .reduce(|a, b| {
                let better = if pick_max { counts[b] > counts[a] } else { counts[b] < counts[a] };
                if better {
                    b
                } else {
                    a
                }
            })
            .expect("non-empty")
    };
    let major = by_size(true);
    let minor = by_size(false);
    let repair = (0..m)
        .filter(|&j| j != major && j != minor)
        .reduce(|a, b| if counts[b] > counts[a] { b } else { a })
        .expect("m >= 3");

    let target = (counts[major] as f64 / rho).round() as usize;
    if target == 0 {
        return Err(unreachable(rho, "minority class would be empty"));
    }
    let second_smallest = (0..m).filter(|&j| j != minor).map(|j| counts[j]).min().expect("m >= 3");
    if target > second_smallest {
        return Err(unreachable(rho, "minority class would overtake another class"));
    }
    let repaired = counts[repair] as i64 - (target as i64 - counts[minor] as i64);
    if repaired <= 0 || repaired as usize > counts[major] {
        return Err(unreachable(rho, "difference cannot be absorbed by the second-largest class"));
    }

    let mut targets = counts.to_vec();
    targets[minor] = target;
    targets[repair] = repaired as usize;
    let plan = ResamplePlan::new(targets);
    let achieved = plan.achieved_ratio().expect("all targets positive");
    if (achieved - rho).abs() > 0.02 * rho {
        return Err(unreachable(rho, format!("closest integer plan reaches {achieved:.2}")));
    }
    Ok(plan)
}

/// Step imbalance: the last `r` of `m` classes get y instances each and the
/// others z, with y = round(total/(ρ(m−r)+r)) and z = round((total − r·y)/(m−r)).
/// The resulting total is within m of `total`.
pub fn step_targets(total: usize, m: usize, r: usize, rho: f64) -> Result<ResamplePlan> {
    if !(r >= 1 && r < m) {
        return Err(Error::InvalidParameter(format!("need 1 <= r < m, got r={r}, m={m}")));
    }
    if !(rho.is_finite() && rho > 1.0) {
        return Err(Error::InvalidParameter(format!("step ratio {rho} must be > 1")));
    }
    let y = (total as f64 / (rho * (m - r) as f64 + r as f64)).round() as usize;
    if y == 0 {
        return Err(unreachable(rho, "minority classes would be empty"));
    }
    let z = ((total as f64 - (r * y) as f64) / (m - r) as f64).round() as usize;
    Ok(ResamplePlan::new((0..m).map(|j| if j < m - r { z } else { y }).collect()))
}
