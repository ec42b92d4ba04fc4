//! Causal and statistical rating metrics.
//!
//! * [`compute_wrs`]: weighted count of pairwise Welch t-test rejections
//!   across protected groups.
//! * [`compute_ate`]: average treatment effect on a model's outcome, by
//!   direct intervention or from observational contrasts, optionally
//!   deconfounded by propensity matching or G-computation.
//! * [`compute_die`]: percentage distortion between the unadjusted and the
//!   adjusted effect.

mod ate;
mod psm;
mod superlearner;
mod wrs;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tabular::CausalSpec;

pub use ate::{compute_ate, compute_die, g_compute_ate, AteConfig, Subject};
pub use psm::{fit_propensity_and_match, MatchResult, PsmConfig};
pub use superlearner::{fit_super_learner, Component, SuperLearner, SuperLearnerConfig};
pub use wrs::{compute_wrs, PairTest, WrsConfig, WrsResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Wrs,
    Ate,
    Die,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Wrs => "wrs",
            Metric::Ate => "ate",
            Metric::Die => "die",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "wrs" => Ok(Metric::Wrs),
            "ate" => Ok(Metric::Ate),
            "die" => Ok(Metric::Die),
            other => Err(crate::Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    #[default]
    None,
    Psm,
    Gcomp,
}

/// A treatment level: a category label or a numeric value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Value(f64),
    Label(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "by", rename_all = "snake_case")]
pub enum TransformOp {
    Scale(f64),
    Set(f64),
    Shift(f64),
}

impl TransformOp {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            TransformOp::Scale(k) => v * k,
            TransformOp::Set(c) => c,
            TransformOp::Shift(d) => v + d,
        }
    }

    pub fn is_identity(self) -> bool {
        matches!(self, TransformOp::Scale(k) if k == 1.0) || matches!(self, TransformOp::Shift(d) if d == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TreatmentDef {
    /// Compare rows observed at level `p` (treated) with rows at `p0`.
    ObservationalContrast { p: Level, p0: Level },
    /// Apply `op` to the treatment feature of every row (treated) and
    /// compare with the unmodified rows (control).
    InterventionalTransform {
        #[serde(flatten)]
        op: TransformOp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature: Option<String>,
    },
}

impl TreatmentDef {
    pub fn contrast(p: Level, p0: Level) -> Self {
        TreatmentDef::ObservationalContrast { p, p0 }
    }

    pub fn transform(op: TransformOp) -> Self {
        TreatmentDef::InterventionalTransform { op, feature: None }
    }

    /// Same treatment with treated and control exchanged, when expressible.
    pub fn swapped(&self) -> Option<Self> {
        match self {
            TreatmentDef::ObservationalContrast { p, p0 } => Some(TreatmentDef::ObservationalContrast {
                p: p0.clone(),
                p0: p.clone(),
            }),
            TreatmentDef::InterventionalTransform { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AteDiagnostics {
    pub n_treated: usize,
    pub n_control: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unmatched_treated: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unmatched_control: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caliper: Option<f64>,
    /// Stacking weights of the outcome ensemble, by component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble_weights: Option<BTreeMap<String, f64>>,
    /// Direct-intervention effect on the model, when one was computed
    /// alongside a statistical estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_effect: Option<f64>,
    /// `(adjusted − unadjusted) × 100`, signed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub die_signed: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    /// The requested estimate: adjusted if an adjustment was asked for.
    pub ate: f64,
    pub abs_ate: f64,
    /// Unadjusted counterpart of `ate`.
    pub ate_observed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ate_deconfounded: Option<f64>,
    /// `||ate_observed| − |ate_deconfounded|| × 100`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub die_percent: Option<f64>,
    pub method: Adjustment,
    pub diagnostics: AteDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    pub random: f64,
    pub biased: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resemblance {
    CloserToBiased,
    CloserToRandom,
    Distinct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub resemblance: Resemblance,
    pub distance_to_biased: f64,
    pub distance_to_random: f64,
}

/// Nearest baseline by absolute score distance. A score is `distinct`
/// when it is farther than `distinct_frac` of the baseline gap from both.
pub fn resemblance(score: f64, baselines: &BaselineScores, distinct_frac: f64) -> Verdict {
    let db = (score - baselines.biased).abs();
    let dr = (score - baselines.random).abs();
    let gap = (baselines.biased - baselines.random).abs();
    let resemblance = if db.min(dr) > distinct_frac * gap {
        Resemblance::Distinct
    } else if db <= dr {
        Resemblance::CloserToBiased
    } else {
        Resemblance::CloserToRandom
    };
    Verdict {
        resemblance,
        distance_to_biased: db,
        distance_to_random: dr,
    }
}

/// Scores of every rated model next to the two reference models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub metric: Metric,
    pub spec: CausalSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment: Option<TreatmentDef>,
    pub scores: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BaselineScores>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub verdicts: BTreeMap<String, Verdict>,
    /// Full per-model result (pair tests or effect estimates).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    pub config: serde_json::Value,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_self_comparison() {
        let b = BaselineScores { random: 0.4, biased: 2.4 };
        let v = resemblance(2.4, &b, 0.25);
        assert_eq!(v.resemblance, Resemblance::CloserToBiased);
        assert_eq!(v.distance_to_biased, 0.0);
        assert_eq!(resemblance(0.5, &b, 0.25).resemblance, Resemblance::CloserToRandom);
        assert_eq!(resemblance(1.4, &b, 0.25).resemblance, Resemblance::Distinct);
    }

    #[test]
    fn treatment_def_json() {
        let t = TreatmentDef::InterventionalTransform {
            op: TransformOp::Scale(0.5),
            feature: Some("Credit amount".into()),
        };
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"mode":"interventional_transform","op":"scale","by":0.5,"feature":"Credit amount"}"#);
        assert_eq!(serde_json::from_str::<TreatmentDef>(&s).unwrap(), t);
        let c: TreatmentDef = serde_json::from_str(r#"{"mode":"observational_contrast","p":"1","p0":0}"#).unwrap();
        assert_eq!(c, TreatmentDef::contrast(Level::Label("1".into()), Level::Value(0.0)));
    }
}
