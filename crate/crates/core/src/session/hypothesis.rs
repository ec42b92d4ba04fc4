use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{HypothesisRequest, Session};
use crate::artifact::{ArtifactKind, ArtifactMetadata, ExplanationArtifact};
use crate::error::{Error, Result};
use crate::models::Task;
use crate::rating::{compute_ate, Adjustment, AteResult, Subject, TransformOp, TreatmentDef};

/// Below this magnitude an effect counts as no change.
const NO_EFFECT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedDirection {
    Increase,
    Decrease,
    None,
    #[default]
    Unspecified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    None,
}

impl Direction {
    pub fn of(effect: f64) -> Direction {
        if effect.abs() < NO_EFFECT {
            Direction::None
        } else if effect > 0.0 {
            Direction::Increase
        } else {
            Direction::Decrease
        }
    }
}

/// A claim about how the model reacts when a feature is changed for
/// every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub treatment: TreatmentDef,
    #[serde(default)]
    pub expected_direction: ExpectedDirection,
    #[serde(default)]
    pub adjust: Adjustment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub model: String,
    pub feature: String,
    pub ate: AteResult,
    pub direction: Direction,
    pub expected_direction: ExpectedDirection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matches_expectation: Option<bool>,
    pub conclusion: String,
}

fn describe(op: TransformOp, feature: &str) -> String {
    match op {
        TransformOp::Scale(k) => format!("multiplying `{feature}` by {k}"),
        TransformOp::Shift(d) => format!("shifting `{feature}` by {d:+}"),
        TransformOp::Set(c) => format!("setting `{feature}` to {c}"),
    }
}

impl Session {
    /// Apply the hypothesis' transform to every audited row and report the
    /// average effect on the model output with a templated conclusion.
    pub fn run_hypothesis(&self, model: Option<&str>, hypothesis: &Hypothesis) -> Result<HypothesisOutcome> {
        let (domain, name, m) = self.tabular_model(model)?;
        let TreatmentDef::InterventionalTransform { op, feature } = &hypothesis.treatment else {
            return Err(Error::InvalidConfig("a hypothesis needs an interventional transform".into()));
        };
        let feature = feature.clone().unwrap_or_else(|| self.spec.treatment.clone());
        let data = domain.audit_data()?;
        let ate = compute_ate(
            &data,
            Subject::Model(m.as_ref()),
            &self.spec,
            &hypothesis.treatment,
            hypothesis.adjust,
            &self.settings.ate,
        )?;
        let direction = Direction::of(ate.ate);
        let matches_expectation = match hypothesis.expected_direction {
            ExpectedDirection::Unspecified => None,
            ExpectedDirection::Increase => Some(direction == Direction::Increase),
            ExpectedDirection::Decrease => Some(direction == Direction::Decrease),
            ExpectedDirection::None => Some(direction == Direction::None),
        };
        let target = match m.info().task {
            Task::BinaryClassification => {
                let outcome = data.feature(data.outcome_name())?;
                match outcome.categories.get(1) {
                    Some(label) => format!("the predicted probability of `{label}`"),
                    None => "the predicted probability".to_string(),
                }
            }
            _ => "the model output".to_string(),
        };
        let change = describe(*op, &feature);
        let mut conclusion = match direction {
            Direction::None => format!("On average, {change} leaves {target} unchanged."),
            Direction::Increase => format!("On average, {change} raises {target} by {:.4}.", ate.ate),
            Direction::Decrease => format!("On average, {change} lowers {target} by {:.4}.", -ate.ate),
        };
        if let Some(ok) = matches_expectation {
            let expected = serde_json::to_value(hypothesis.expected_direction).expect("enum serializes");
            let expected = expected.as_str().unwrap_or_default();
            conclusion.push_str(if ok {
                " This agrees with the expected direction ("
            } else {
                " This contradicts the expected direction ("
            });
            conclusion.push_str(expected);
            conclusion.push_str(").");
        }
        Ok(HypothesisOutcome {
            model: name.to_string(),
            feature,
            ate,
            direction,
            expected_direction: hypothesis.expected_direction,
            matches_expectation,
            conclusion,
        })
    }
}

pub(super) fn artifact(session: &Session, request: &HypothesisRequest) -> Result<ExplanationArtifact> {
    let outcome = session.run_hypothesis(request.model.as_deref(), &request.hypothesis)?;
    let inputs = json!({
        "model": outcome.model,
        "hypothesis": request.hypothesis,
        "spec": session.spec,
    });
    ExplanationArtifact::new(
        ArtifactKind::Hypothesis,
        inputs,
        &outcome,
        ArtifactMetadata {
            seed: session.settings.seed,
            method: "compute_ate".into(),
            background_size: None,
            warnings: session.warnings(),
        },
    )
}
