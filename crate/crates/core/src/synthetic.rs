//! Seeded synthetic datasets with known causal structure.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tabular::{Cell, Dataset, FeatureSchema};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    /// `T ~ N(0,1)` independent of `Z`.
    Independent,
    /// `T = Z + N(0,1)`.
    Confounded,
    /// `T = 1[Z + N(0,1) > 0]`, stored as a binary column.
    Binarized,
}

pub const TREATMENT: &str = "T";
pub const CONFOUNDER: &str = "Z";
pub const OUTCOME: &str = "O";

/// `O = 2T + 3Z + N(0, noise²)` with `Z ~ N(0,1)`. The true effect of a
/// unit change in `T` is 2.
pub fn linear_effect(n: usize, seed: u64, assignment: Assignment, noise: f64) -> Dataset {
    let mut rng = crate::seeded_rng(seed);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = std.sample(&mut rng);
        let e: f64 = std.sample(&mut rng);
        let t = match assignment {
            Assignment::Independent => e,
            Assignment::Confounded => z + e,
            Assignment::Binarized => f64::from(u8::from(z + e > 0.0)),
        };
        let o = 2.0 * t + 3.0 * z + noise * std.sample(&mut rng);
        let t_cell = if assignment == Assignment::Binarized {
            Cell::Cat(t as u32)
        } else {
            Cell::Num(t)
        };
        rows.push(vec![t_cell, Cell::Num(z), Cell::Num(o)]);
    }
    let t_schema = if assignment == Assignment::Binarized {
        FeatureSchema::binary(TREATMENT)
    } else {
        FeatureSchema::numeric(TREATMENT)
    };
    Dataset::new(
        vec![t_schema, FeatureSchema::numeric(CONFOUNDER), FeatureSchema::numeric(OUTCOME)],
        rows,
        OUTCOME,
    )
    .expect("synthetic schema is valid")
}

/// Ordinary least squares slope of `y` on `x` with intercept.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = crate::stats::mean(x);
    let my = crate::stats::mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Outcomes for groups `g0, g1, ...` with the given means, `n` draws each
/// from `N(mean, sd²)`. Returns the dataset (columns `group`, `y`).
pub fn grouped_outcomes(means: &[f64], sd: f64, n: usize, seed: u64) -> Dataset {
    let mut rng = crate::seeded_rng(seed);
    let labels: Vec<String> = (0..means.len()).map(|g| format!("g{g}")).collect();
    let mut rows = Vec::with_capacity(means.len() * n);
    for (g, &m) in means.iter().enumerate() {
        for _ in 0..n {
            let y = if sd > 0.0 {
                m + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
            } else {
                m
            };
            rows.push(vec![Cell::Cat(g as u32), Cell::Num(y)]);
        }
    }
    let group = if labels.len() >= 2 {
        FeatureSchema::categorical("group", labels)
    } else {
        FeatureSchema::categorical("group", ["g0", "unused"])
    };
    Dataset::new(vec![group, FeatureSchema::numeric("y")], rows, "y").expect("synthetic schema is valid")
}
