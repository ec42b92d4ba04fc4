//! Scenario configs: a dataset, models, causal spec, reference models and
//! an ordered list of questions, replayable into a [`Session`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BaselineSettings, HypothesisRequest, Question, Role, Session, SessionSettings};
use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::io::{self, SchemaDescriptor};
use crate::models::{
    train_forecaster_pooled, train_logistic, train_tree_ensemble, AnyModel, ExternalDescriptor, ExternalModel,
    Forecaster, ForecasterConfig, LogisticConfig, Predictor, StoredModel, TreeConfig,
};
use crate::tabular::{CausalSpec, Dataset};
use crate::timeseries::{load_series_csv, synthetic_market, AuditFrameConfig, Series};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// The bundled German Credit file plus derived `Sex` and `Age group`.
    GermanCredit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        age_threshold: Option<f64>,
    },
    Csv {
        path: PathBuf,
        schema: SchemaDescriptor,
    },
    SyntheticMarket {
        #[serde(default = "default_days")]
        days: usize,
        #[serde(default = "default_start")]
        start: NaiveDate,
        #[serde(default = "default_market_seed")]
        seed: u64,
    },
    /// `date, close, company` rows.
    SeriesCsv { path: PathBuf },
}

fn default_days() -> usize {
    260
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 3, 23).expect("valid date")
}

fn default_market_seed() -> u64 {
    2024
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic {
        name: String,
        #[serde(default)]
        config: LogisticConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<Vec<String>>,
    },
    TreeEnsemble {
        name: String,
        #[serde(default)]
        config: TreeConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<Vec<String>>,
    },
    Autoregressive {
        name: String,
        #[serde(default)]
        config: ForecasterConfig,
    },
    External(ExternalDescriptor),
    /// A model saved as [`StoredModel`] JSON.
    Stored {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

/// Rows held out from training; ratings and explanations use them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Split {
    /// `(train, test)` row indices, each ascending.
    pub fn apply(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig("test_fraction must lie in (0, 1)".into()));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut crate::seeded_rng(self.seed));
        let k = ((n as f64) * self.test_fraction).round() as usize;
        let mut test = idx[..k].to_vec();
        let mut train = idx[k..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Ok((train, test))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBaselines {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<BaselineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biased: Option<BaselineConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub role: Role,
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub models: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal_spec: Option<CausalSpec>,
    /// Protected attributes used when no causal spec is given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub protected: Vec<String>,
    #[serde(default)]
    pub baselines: ScenarioBaselines,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<AuditFrameConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SessionSettings>,
    /// Kept as raw JSON so unknown categories surface as such.
    #[serde(default)]
    pub questions: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypotheses: Vec<HypothesisRequest>,
}

pub const BUNDLED_SCENARIOS: [(&str, &str); 6] = [
    ("jack", include_str!("../../scenarios/jack.json")),
    ("maya", include_str!("../../scenarios/maya.json")),
    ("james", include_str!("../../scenarios/james.json")),
    ("suresh", include_str!("../../scenarios/suresh.json")),
    ("jane", include_str!("../../scenarios/jane.json")),
    ("amanda", include_str!("../../scenarios/amanda.json")),
];

/// Raw JSON of a bundled scenario.
pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    BUNDLED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

enum Loaded {
    Tabular { data: Dataset, features: Option<Vec<String>> },
    Forecasting(Vec<Series>),
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl DatasetSource {
    fn load(&self, base: &Path) -> Result<Loaded> {
        Ok(match self {
            DatasetSource::GermanCredit { age_threshold } => {
                let raw = io::german_credit()?.dataset;
                let outcome = raw.outcome_name().to_string();
                let features = raw.feature_names().into_iter().filter(|f| *f != outcome).collect();
                Loaded::Tabular {
                    data: io::audit_frame(&raw, *age_threshold)?,
                    features: Some(features),
                }
            }
            DatasetSource::Csv { path, schema } => Loaded::Tabular {
                data: io::load_csv(open(&resolve(base, path))?, schema)?,
                features: None,
            },
            DatasetSource::SyntheticMarket { days, start, seed } => {
                Loaded::Forecasting(synthetic_market(*days, *start, *seed))
            }
            DatasetSource::SeriesCsv { path } => Loaded::Forecasting(load_series_csv(open(&resolve(base, path))?)?),
        })
    }
}

fn load_stored(base: &Path, path: &Path) -> Result<StoredModel> {
    let text = std::fs::read_to_string(resolve(base, path)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn renamed(model: AnyModel, name: Option<&str>) -> Result<(String, AnyModel)> {
    Ok((name.unwrap_or(&model.info().name).to_string(), model))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))
    }

    pub fn bundled(name: &str) -> Result<ScenarioConfig> {
        let text = bundled_scenario(name).ok_or_else(|| Error::InvalidConfig(format!("no bundled scenario `{name}`")))?;
        ScenarioConfig::from_json(text)
    }

    pub fn parsed_questions(&self) -> Result<Vec<Question>> {
        self.questions.iter().map(Question::from_json).collect()
    }

    /// Load data, train or load models and open a session. Relative paths
    /// resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Session> {
        let settings = self.settings.clone().unwrap_or_default().with_seed(self.seed);
        let mut baselines = BaselineSettings::seeded(self.seed);
        if let Some(r) = &self.baselines.random {
            baselines.random = r.clone();
        }
        if let Some(b) = &self.baselines.biased {
            baselines.biased = b.clone();
        }
        let session = match self.dataset.load(base)? {
            Loaded::Tabular { data, features } => {
                if self.frame.is_some() {
                    return Err(Error::InvalidConfig("`frame` applies to forecasting scenarios".into()));
                }
                let (train, audit_rows) = match &self.split {
                    Some(s) => {
                        let (train, test) = s.apply(data.n_rows())?;
                        (data.select_rows(&train)?, Some(test))
                    }
                    None => (data.clone(), None),
                };
                let outcome = data.outcome_name().to_string();
                let models = self
                    .models
                    .iter()
                    .map(|spec| self.tabular_model(spec, &train, &outcome, features.as_deref(), base))
                    .collect::<Result<Vec<_>>>()?;
                Session::tabular(
                    self.name.clone(),
                    self.role,
                    data,
                    audit_rows,
                    models,
                    self.causal_spec.clone(),
                    &self.protected,
                    settings,
                )?
            }
            Loaded::Forecasting(series) => {
                if self.split.is_some() || self.causal_spec.is_some() {
                    return Err(Error::InvalidConfig(
                        "forecasting scenarios take neither `split` nor `causal_spec`".into(),
                    ));
                }
                let models = self
                    .models
                    .iter()
                    .map(|spec| forecast_model(spec, &series, base))
                    .collect::<Result<Vec<_>>>()?;
                Session::forecasting(
                    self.name.clone(),
                    self.role,
                    series,
                    models,
                    self.frame.clone().unwrap_or_default(),
                    settings,
                )?
            }
        };
        Ok(session.with_baselines(baselines))
    }

    fn tabular_model(
        &self,
        spec: &ModelSpec,
        train: &Dataset,
        outcome: &str,
        default_features: Option<&[String]>,
        base: &Path,
    ) -> Result<(String, Arc<dyn Predictor>)> {
        let (name, model) = match spec {
            ModelSpec::Logistic { name, config, features } => {
                let m = train_logistic(train, outcome, features.as_deref().or(default_features), config)?;
                (name.clone(), AnyModel::Tabular(Arc::new(m.rename(name.clone()))))
            }
            ModelSpec::TreeEnsemble { name, config, features } => {
                let m = train_tree_ensemble(train, outcome, features.as_deref().or(default_features), config)?;
                (name.clone(), AnyModel::Tabular(Arc::new(m.rename(name.clone()))))
            }
            ModelSpec::External(d) => (d.info.name.clone(), AnyModel::Tabular(Arc::new(ExternalModel::new(d.clone())))),
            ModelSpec::Stored { path, name } => renamed(load_stored(base, path)?.into_model()?, name.as_deref())?,
            ModelSpec::Autoregressive { name, .. } => {
                return Err(Error::InvalidConfig(format!("`{name}` is a forecaster but the dataset is tabular")))
            }
        };
        match model {
            AnyModel::Tabular(m) => Ok((name, m)),
            AnyModel::Forecast(_) => Err(Error::InvalidConfig(format!("`{name}` is a forecaster but the dataset is tabular"))),
        }
    }

    /// Run every question, then every hypothesis, in order.
    pub fn run(&self, base: &Path) -> Result<Session> {
        let questions = self.parsed_questions()?;
        let mut session = self.build(base)?;
        for q in questions {
            session.ask(q)?;
        }
        for h in &self.hypotheses {
            session.hypothesize(h.clone())?;
        }
        Ok(session)
    }
}

fn forecast_model(spec: &ModelSpec, series: &[Series], base: &Path) -> Result<(String, Arc<dyn Forecaster>)> {
    match spec {
        ModelSpec::Autoregressive { name, config } => {
            let closes: Vec<&[f64]> = series.iter().map(|s| s.close.as_slice()).collect();
            let m = train_forecaster_pooled(&closes, config)?;
            Ok((name.clone(), Arc::new(m.rename(name.clone()))))
        }
        ModelSpec::Stored { path, name } => match renamed(load_stored(base, path)?.into_model()?, name.as_deref())? {
            (name, AnyModel::Forecast(f)) => Ok((name, f)),
            (name, AnyModel::Tabular(_)) => {
                Err(Error::InvalidConfig(format!("`{name}` is a tabular model but the dataset is a set of series")))
            }
        },
        other => Err(Error::InvalidConfig(format!(
            "{} models cannot forecast",
            serde_json::to_value(other)
                .ok()
                .and_then(|v| v.get("kind").and_then(Value::as_str).map(str::to_string))
                .unwrap_or_default()
        ))),
    }
}
