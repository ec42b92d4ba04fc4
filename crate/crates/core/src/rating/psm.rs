use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{train_logistic, LogisticConfig, Predictor};
use crate::stats::{logit, std_dev};
use crate::tabular::{Cell, Dataset, FeatureSchema};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsmConfig {
    #[serde(default = "default_caliper")]
    pub caliper_mult: f64,
    #[serde(default = "default_true")]
    pub with_replacement: bool,
}

fn default_caliper() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

impl Default for PsmConfig {
    fn default() -> Self {
        PsmConfig {
            caliper_mult: 0.2,
            with_replacement: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Estimated treatment probability per row.
    pub propensity: Vec<f64>,
    pub caliper: f64,
    /// `(treated row, control row)` for every treated row with a match.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_treated: Vec<usize>,
}

const TREATED_COLUMN: &str = "__treated";

/// Logistic propensity of `treated` given `covariates`, then 1:1 nearest
/// neighbour matching of treated rows to control rows on the logit scale
/// within `caliper_mult · SD(logit)`. Equal distances resolve to the lowest
/// control row index.
pub fn fit_propensity_and_match(
    data: &Dataset,
    treated: &[bool],
    covariates: &[String],
    config: &PsmConfig,
) -> Result<MatchResult> {
    if treated.len() != data.n_rows() {
        return Err(Error::LengthMismatch {
            expected: data.n_rows(),
            found: treated.len(),
        });
    }
    if treated.iter().all(|t| *t) || treated.iter().all(|t| !*t) {
        return Err(Error::AllRowsOneArm);
    }
    if covariates.is_empty() {
        return Err(Error::InvalidCausalSpec(
            "propensity matching needs at least one covariate".into(),
        ));
    }
    let mut schema: Vec<FeatureSchema> = covariates
        .iter()
        .map(|c| data.feature(c).cloned())
        .collect::<Result<_>>()?;
    schema.push(FeatureSchema::binary(TREATED_COLUMN));
    let cols: Vec<usize> = covariates.iter().map(|c| data.column_index(c)).collect::<Result<_>>()?;
    let rows = data
        .rows()
        .iter()
        .zip(treated)
        .map(|(r, &t)| {
            let mut row: Vec<Cell> = cols.iter().map(|&c| r[c]).collect();
            row.push(Cell::Cat(u32::from(t)));
            row
        })
        .collect();
    let frame = Dataset::new(schema, rows, TREATED_COLUMN)?;
    let model = train_logistic(&frame, TREATED_COLUMN, Some(covariates), &LogisticConfig::default())?;
    let propensity = model.predict(&frame.design(covariates)?)?;
    let scores: Vec<f64> = propensity.iter().map(|&p| logit(p)).collect();
    let caliper = config.caliper_mult * std_dev(&scores);

    let mut controls: Vec<usize> = (0..treated.len()).filter(|&i| !treated[i]).collect();
    controls.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut used = vec![false; treated.len()];
    let mut pairs = Vec::new();
    let mut unmatched_treated = Vec::new();
    for t in (0..treated.len()).filter(|&i| treated[i]) {
        match nearest(&controls, &scores, scores[t], caliper, &used) {
            Some(c) => {
                if !config.with_replacement {
                    used[c] = true;
                }
                pairs.push((t, c));
            }
            None => unmatched_treated.push(t),
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoMatchesWithinCaliper);
    }
    Ok(MatchResult {
        propensity,
        caliper,
        pairs,
        unmatched_treated,
    })
}

/// Closest unused candidate within the caliper. `sorted` is ordered by
/// score, then row index.
fn nearest(sorted: &[usize], scores: &[f64], target: f64, caliper: f64, used: &[bool]) -> Option<usize> {
    let split = sorted.partition_point(|&i| scores[i] < target);
    let mut best: Option<(f64, usize)> = None;
    let mut consider = |i: usize| {
        let d = (scores[i] - target).abs();
        if d > caliper || used[i] {
            return;
        }
        match best {
            Some((bd, bi)) if d > bd || (d == bd && i > bi) => {}
            _ => best = Some((d, i)),
        }
    };
    // walk outwards until both directions leave the caliper
    for &i in sorted[split..].iter() {
        if scores[i] - target > caliper {
            break;
        }
        consider(i);
    }
    for &i in sorted[..split].iter().rev() {
        if target - scores[i] > caliper {
            break;
        }
        consider(i);
    }
    best.map(|(_, i)| i)
}
