//! Literal check of every selection and weighting constraint.

use serde::Serialize;

use crate::types::{AccuracyMatrix, HyperParams, SelectionVector, WeightMatrix};

/// Where the worst violation of a constraint family occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Global,
    Classifier(usize),
    Class(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    /// Constraint number, 2 through 9.
    pub id: u8,
    pub description: &'static str,
    pub satisfied: bool,
    /// Largest amount by which the constraint fails (0 when it holds).
    pub worst_violation: f64,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub tolerance: f64,
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn is_conformant(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn check(&self, id: u8) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn violated(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.satisfied)
    }
}

struct Worst {
    value: f64,
    location: Location,
}

impl Worst {
    fn new(location: Location) -> Self {
        Self { value: 0.0, location }
    }

    fn offer(&mut self, violation: f64, location: Location) {
        if violation > self.value || violation.is_nan() {
            self.value = violation;
            self.location = location;
        }
    }
}

/// Checks W and X against every constraint family. Never fails: shape
/// problems surface as violations of the affected constraints.
pub fn validate_constraints(
    accuracy: &AccuracyMatrix,
    weights: &WeightMatrix,
    selection: &SelectionVector,
    params: &HyperParams,
    tol: f64,
) -> ConstraintReport {
    let (n, m) = (accuracy.n(), accuracy.m());
    let shape_ok = weights.shape() == (n, m) && selection.len() == n;
    let eps = params.epsilon;
    let x = |i: usize| if selection.is_selected(i) { 1.0 } else { 0.0 };

    let mut checks = Vec::with_capacity(8);
    let mut push = |id: u8, description: &'static str, worst: Worst| {
        let value = if shape_ok { worst.value } else { f64::INFINITY };
        checks.push(ConstraintCheck {
            id,
            description,
            satisfied: value <= tol,
            worst_violation: value,
            location: worst.location,
        });
    };

    if !shape_ok {
        for (id, description) in DESCRIPTIONS {
            push(id, description, Worst::new(Location::Global));
        }
        return ConstraintReport { tolerance: tol, checks };
    }

    // Selection flags are stored as booleans, so they are binary by construction.
    push(2, DESCRIPTIONS[0].1, Worst::new(Location::Global));

    let mut nonneg = Worst::new(Location::Global);
    for i in 0..n {
        for j in 0..m {
            nonneg.offer(-weights.get(i, j), Location::Pair(i, j));
        }
    }
    push(3, DESCRIPTIONS[1].1, nonneg);

    let mut count = Worst::new(Location::Global);
    count.offer((selection.count() as f64 - params.k as f64).abs(), Location::Global);
    push(4, DESCRIPTIONS[2].1, count);

    let mut columns = Worst::new(Location::Global);
    for j in 0..m {
        columns.offer((weights.column_sum(j) - 1.0).abs(), Location::Class(j));
    }
    push(5, DESCRIPTIONS[3].1, columns);

    let mut unselected = Worst::new(Location::Global);
    let mut floor = Worst::new(Location::Global);
    for i in 0..n {
        let row = weights.row_sum(i);
        unselected.offer(row - m as f64 * x(i), Location::Classifier(i));
        floor.offer(eps - row - params.big_m * (1.0 - x(i)), Location::Classifier(i));
    }
    push(6, DESCRIPTIONS[4].1, unselected);
    push(7, DESCRIPTIONS[5].1, floor);

    let mut per_class = Worst::new(Location::Global);
    let mut weighted_total = 0.0;
    for j in 0..m {
        let weighted: f64 = (0..n).map(|i| weights.get(i, j) * accuracy.get(i, j)).sum();
        weighted_total += weighted;
        per_class.offer(accuracy.column_mean(j) + eps - weighted, Location::Class(j));
    }
    push(8, DESCRIPTIONS[6].1, per_class);

    let mut overall = Worst::new(Location::Global);
    overall.offer(accuracy.grand_mean() + eps - weighted_total / m as f64, Location::Global);
    push(9, DESCRIPTIONS[7].1, overall);

    ConstraintReport { tolerance: tol, checks }
}

const DESCRIPTIONS: [(u8, &str); 8] = [
    (2, "selection flags are binary"),
    (3, "weights are non-negative"),
    (4, "exactly K classifiers are selected"),
    (5, "each class column of weights sums to one"),
    (6, "unselected classifiers carry no weight"),
    (7, "selected classifiers carry at least epsilon total weight"),
    (8, "weighted accuracy of each class beats the uniform average by epsilon"),
    (9, "overall weighted accuracy beats the uniform average by epsilon"),
];
