//! Stakeholder sessions. A question is routed to engine calls, answered
//! with an [`ExplanationArtifact`] and appended to the session history;
//! ratings are always reported next to a random and a biased reference
//! model.

mod answer;
mod forecast;
mod hypothesis;
mod question;
mod rde;
mod report;
mod scenario;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::artifact::ExplanationArtifact;
use crate::baselines::{BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::explain::{CounterfactualConfig, ShapConfig, SurrogateConfig};
use crate::models::{Forecaster, Predictor};
use crate::rating::{AteConfig, WrsConfig};
use crate::tabular::{CausalSpec, Dataset};
use crate::timeseries::{AuditFrameConfig, Series};

pub use forecast::{LagSummary, SurrogateShap, SurrogateSummary};
pub use hypothesis::{Direction, ExpectedDirection, Hypothesis, HypothesisOutcome};
pub use question::{route_question, Category, Plan, Question};
pub use answer::Attributed;
pub use rde::{Accuracy, RatingParams, RdeResult};
pub use report::{summarize, Report, ReportSection};
pub use scenario::{
    bundled_scenario, DatasetSource, ModelSpec, ScenarioBaselines, ScenarioConfig, Split, BUNDLED_SCENARIOS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Individual,
    Regulatory,
    Organizational,
}

/// Explainer and rating parameters shared by every question in a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSettings {
    pub seed: u64,
    pub shap: ShapConfig,
    pub ate: AteConfig,
    pub counterfactual: CounterfactualConfig,
    pub surrogate: SurrogateConfig,
    pub wrs: WrsConfig,
    /// A score farther than this fraction of the baseline gap from both
    /// baselines is reported as distinct.
    pub distinct_frac: f64,
    pub pdp_grid: usize,
    /// Rows averaged by global attribution.
    pub global_rows: usize,
}

impl Default for SessionSettings {
    fn default() -> Self {
        SessionSettings {
            seed: 0,
            shap: ShapConfig::default(),
            ate: AteConfig::default(),
            counterfactual: CounterfactualConfig::default(),
            surrogate: SurrogateConfig::default(),
            wrs: WrsConfig::default(),
            distinct_frac: 0.25,
            pdp_grid: 20,
            global_rows: 100,
        }
    }
}

impl SessionSettings {
    /// Propagate one seed to every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.shap.seed = seed;
        self.ate.learner.seed = seed;
        self.surrogate.trees.seed = seed;
        self
    }
}

/// Configuration of the two reference models. A biased config without a
/// protected attribute follows the attribute of each question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSettings {
    pub random: BaselineConfig,
    pub biased: BaselineConfig,
}

impl BaselineSettings {
    pub fn seeded(seed: u64) -> Self {
        BaselineSettings {
            random: BaselineConfig::random(seed),
            biased: BaselineConfig {
                kind: BaselineKind::Biased,
                seed,
                protected: None,
                group_outputs: None,
                regression_range: None,
            },
        }
    }
}

pub struct TabularDomain {
    /// Full frame; instance indices in questions refer to its rows.
    pub data: Dataset,
    /// Rows that ratings and global explanations are computed on.
    pub audit_rows: Vec<usize>,
    pub models: Vec<(String, Arc<dyn Predictor>)>,
}

pub struct ForecastDomain {
    pub series: Vec<Series>,
    pub models: Vec<(String, Arc<dyn Forecaster>)>,
    pub frame: AuditFrameConfig,
    cache: forecast::Cache,
}

pub enum Domain {
    Tabular(TabularDomain),
    Forecasting(ForecastDomain),
}

impl Domain {
    pub fn model_names(&self) -> Vec<&str> {
        match self {
            Domain::Tabular(d) => d.models.iter().map(|(n, _)| n.as_str()).collect(),
            Domain::Forecasting(d) => d.models.iter().map(|(n, _)| n.as_str()).collect(),
        }
    }
}

/// Hypothesis together with the model it targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(flatten)]
    pub hypothesis: Hypothesis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Question(Question),
    Hypothesis(HypothesisRequest),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub request: Request,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    pub artifact: ExplanationArtifact,
}

pub struct Session {
    id: String,
    role: Role,
    domain: Domain,
    spec: CausalSpec,
    spec_is_default: bool,
    settings: SessionSettings,
    baselines: BaselineSettings,
    history: Vec<HistoryEntry>,
}

/// First numeric column other than the outcome and the protected ones.
fn default_spec(data: &Dataset, protected: &[String]) -> Result<CausalSpec> {
    let treatment = data
        .schema()
        .iter()
        .find(|f| f.is_numeric() && f.name != data.outcome_name() && !protected.contains(&f.name))
        .ok_or_else(|| Error::InvalidCausalSpec("no numeric feature to use as default treatment".into()))?;
    Ok(CausalSpec::new(treatment.name.clone(), data.outcome_name(), protected.iter().cloned()))
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::InvalidConfig(format!("model `{n}` registered twice")));
        }
    }
    if seen.is_empty() {
        return Err(Error::InvalidConfig("a session needs at least one model".into()));
    }
    Ok(())
}

impl Session {
    /// Tabular session. Without a causal spec, the first numeric feature
    /// becomes the treatment and `protected` the confounders; artifacts then
    /// carry a warning.
    pub fn tabular(
        id: impl Into<String>,
        role: Role,
        data: Dataset,
        audit_rows: Option<Vec<usize>>,
        models: Vec<(String, Arc<dyn Predictor>)>,
        spec: Option<CausalSpec>,
        protected: &[String],
        settings: SessionSettings,
    ) -> Result<Session> {
        check_unique(models.iter().map(|(n, _)| n.as_str()))?;
        for (_, m) in &models {
            for f in &m.info().features {
                data.column_index(f)?;
            }
        }
        let (spec, spec_is_default) = match spec {
            Some(s) => (s, false),
            None => (default_spec(&data, protected)?, true),
        };
        spec.validate(&data)?;
        let audit_rows = match audit_rows {
            Some(rows) => {
                if let Some(bad) = rows.iter().find(|&&r| r >= data.n_rows()) {
                    return Err(Error::InvalidConfig(format!("audit row {bad} out of range")));
                }
                rows
            }
            None => (0..data.n_rows()).collect(),
        };
        let seed = settings.seed;
        Ok(Session {
            id: id.into(),
            role,
            domain: Domain::Tabular(TabularDomain {
                data,
                audit_rows,
                models,
            }),
            spec,
            spec_is_default,
            settings,
            baselines: BaselineSettings::seeded(seed),
            history: Vec::new(),
        })
    }

    /// Forecasting session over several series. The audited outcome is the
    /// per-window residual, the treatment the perturbation arm and the
    /// protected attribute the company.
    pub fn forecasting(
        id: impl Into<String>,
        role: Role,
        series: Vec<Series>,
        models: Vec<(String, Arc<dyn Forecaster>)>,
        frame: AuditFrameConfig,
        settings: SessionSettings,
    ) -> Result<Session> {
        check_unique(models.iter().map(|(n, _)| n.as_str()))?;
        if series.is_empty() {
            return Err(Error::InvalidDataset("no series".into()));
        }
        let seed = settings.seed;
        Ok(Session {
            id: id.into(),
            role,
            domain: Domain::Forecasting(ForecastDomain {
                series,
                models,
                frame,
                cache: forecast::Cache::default(),
            }),
            spec: forecast::spec(),
            spec_is_default: false,
            settings,
            baselines: BaselineSettings::seeded(seed),
            history: Vec::new(),
        })
    }

    pub fn with_baselines(mut self, baselines: BaselineSettings) -> Self {
        self.baselines = baselines;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn spec(&self) -> &CausalSpec {
        &self.spec
    }

    pub fn spec_is_default(&self) -> bool {
        self.spec_is_default
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn baselines(&self) -> &BaselineSettings {
        &self.baselines
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Answer a question and append it to the history. Failed questions
    /// leave the history untouched.
    pub fn ask(&mut self, question: Question) -> Result<ExplanationArtifact> {
        let plan = route_question(question.category);
        let artifact = answer::answer(self, &question, &plan)?;
        self.history.push(HistoryEntry {
            request: Request::Question(question),
            plan: Some(plan),
            artifact: artifact.clone(),
        });
        Ok(artifact)
    }

    /// Test a what-if hypothesis on one model and append the result.
    pub fn hypothesize(&mut self, request: HypothesisRequest) -> Result<ExplanationArtifact> {
        let artifact = hypothesis::artifact(self, &request)?;
        self.history.push(HistoryEntry {
            request: Request::Hypothesis(request),
            plan: None,
            artifact: artifact.clone(),
        });
        Ok(artifact)
    }

    /// The named model, or the first registered one.
    pub(crate) fn tabular_model(&self, name: Option<&str>) -> Result<(&TabularDomain, &str, &Arc<dyn Predictor>)> {
        let Domain::Tabular(d) = &self.domain else {
            return Err(Error::Unsupported("this question needs a tabular session".into()));
        };
        let (n, m) = match name {
            Some(name) => d
                .models
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::UnknownModel(name.to_string()))?,
            None => &d.models[0],
        };
        Ok((d, n.as_str(), m))
    }

    pub(crate) fn warnings(&self) -> Vec<String> {
        if self.spec_is_default {
            vec![format!(
                "no causal spec supplied; defaulted to treatment `{}` with protected [{}]",
                self.spec.treatment,
                self.spec.protected.join(", ")
            )]
        } else {
            Vec::new()
        }
    }

    pub fn render_report(&self) -> Result<Report> {
        report::render(self)
    }
}

impl TabularDomain {
    pub(crate) fn audit_data(&self) -> Result<Dataset> {
        if self.audit_rows.len() == self.data.n_rows() {
            Ok(self.data.clone())
        } else {
            self.data.select_rows(&self.audit_rows)
        }
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("role", &self.role)
            .field("models", &self.domain.model_names())
            .field("history", &self.history.len())
            .finish()
    }
}
