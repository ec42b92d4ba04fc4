use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{t_critical, welch_t_test};
use crate::tabular::GroupPartition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrsConfig {
    /// `(confidence, weight)` pairs.
    pub levels: Vec<(f64, f64)>,
}

impl Default for WrsConfig {
    fn default() -> Self {
        WrsConfig {
            levels: vec![(0.95, 1.0), (0.75, 0.8), (0.60, 0.6)],
        }
    }
}

impl WrsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig("WRS needs at least one level".into()));
        }
        if self.levels.iter().any(|&(c, w)| !(c > 0.0 && c < 1.0) || !(w > 0.0)) {
            return Err(Error::InvalidConfig(
                "WRS confidences must lie in (0,1) and weights be positive".into(),
            ));
        }
        if self.levels.windows(2).any(|p| p[1].0 >= p[0].0 || p[1].1 > p[0].1) {
            return Err(Error::InvalidConfig(
                "WRS confidences must strictly decrease and weights not increase".into(),
            ));
        }
        Ok(())
    }

    pub fn max_score(&self, groups: usize) -> f64 {
        let pairs = groups * groups.saturating_sub(1) / 2;
        pairs as f64 * self.levels.iter().map(|l| l.1).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub pval: f64,
    pub dof: f64,
    pub zero_variance: bool,
    /// One flag per configured level.
    pub rejected: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrsResult {
    pub psi: f64,
    pub max_psi: f64,
    pub pairs: Vec<PairTest>,
}

/// Weighted rejection score over every pair of groups. Pairs are keyed and
/// summed in sorted label order so the score does not depend on how the
/// partition lists its groups.
pub fn compute_wrs(outcomes: &[f64], partition: &GroupPartition, config: &WrsConfig) -> Result<WrsResult> {
    config.validate()?;
    let mut groups: Vec<(&str, Vec<f64>)> = Vec::with_capacity(partition.groups.len());
    for (label, rows) in &partition.groups {
        let mut values = Vec::with_capacity(rows.len());
        for &r in rows {
            let v = *outcomes.get(r).ok_or(Error::LengthMismatch {
                expected: r + 1,
                found: outcomes.len(),
            })?;
            if v.is_finite() {
                values.push(v);
            }
        }
        if values.len() < 2 {
            return Err(Error::GroupTooSmall(label.clone()));
        }
        groups.push((label, values));
    }
    groups.sort_by(|a, b| a.0.cmp(b.0));

    let mut psi = 0.0;
    let mut pairs = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let res = welch_t_test(&groups[i].1, &groups[j].1)?;
            let rejected: Vec<bool> = config
                .levels
                .iter()
                .map(|&(c, _)| res.t.abs() > t_critical(c, res.dof))
                .collect();
            psi += config
                .levels
                .iter()
                .zip(&rejected)
                .filter(|(_, r)| **r)
                .map(|(l, _)| l.1)
                .sum::<f64>();
            pairs.push(PairTest {
                a: groups[i].0.to_string(),
                b: groups[j].0.to_string(),
                t: res.t,
                pval: res.pval,
                dof: res.dof,
                zero_variance: res.zero_variance,
                rejected,
            });
        }
    }
    Ok(WrsResult {
        psi,
        max_psi: config.max_score(groups.len()),
        pairs,
    })
}
