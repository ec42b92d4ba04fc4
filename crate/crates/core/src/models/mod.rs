//! Uniform scoring contract plus the built-in reference models.

mod external;
mod forecast;
mod logistic;
mod trees;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Dataset;

pub use external::{wrap_external, Endpoint, ExternalDescriptor, ExternalModel};
pub use forecast::{train_forecaster, train_forecaster_pooled, ArForecaster, ForecasterConfig};
pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use trees::{
    fit_arrays, train_tree_ensemble, EnsembleMode, Link, Node, SplitRule, Tree, TreeConfig, TreeEnsembleModel,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    BinaryClassification,
    Regression,
    Forecasting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Builtin,
    Baseline,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub task: Task,
    pub provenance: Provenance,
    /// Input columns, in the order `predict` expects them.
    pub features: Vec<String>,
    /// Hard-label threshold for classifiers.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

impl ModelInfo {
    pub fn new(name: impl Into<String>, task: Task, provenance: Provenance, features: Vec<String>) -> Self {
        ModelInfo {
            name: name.into(),
            task,
            provenance,
            features,
            threshold: 0.5,
        }
    }
}

/// A model that scores encoded rows (see [`Dataset::design`]).
///
/// Classifiers return the class-1 probability. Implementations must be
/// deterministic for a fixed state and input.
pub trait Predictor: Send + Sync + Debug {
    fn info(&self) -> &ModelInfo;

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>>;

    fn as_tree_ensemble(&self) -> Option<&TreeEnsembleModel> {
        None
    }
}

/// Score every row of a dataset, selecting the model's own input columns.
pub fn predict_dataset(model: &dyn Predictor, data: &Dataset) -> Result<Vec<f64>> {
    let rows = data.design(&model.info().features)?;
    model.predict(&rows)
}

pub(crate) fn check_width(rows: &[Vec<f64>], expected: usize) -> Result<()> {
    match rows.iter().find(|r| r.len() != expected) {
        Some(r) => Err(Error::FeatureCount {
            expected,
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Wraps a plain function as a predictor. Useful for constructed models in
/// tests, examples and synthetic audits.
pub struct FnPredictor<F> {
    info: ModelInfo,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(info: ModelInfo, f: F) -> Self {
        FnPredictor { info, f }
    }
}

impl<F> Debug for FnPredictor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPredictor").field("info", &self.info).finish()
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_width(rows, self.info.features.len())?;
        Ok(rows.iter().map(|r| (self.f)(r)).collect())
    }
}

/// Forecasting contract: `group` names the series (e.g. a company) so that
/// group-aware baselines can condition on it.
pub trait Forecaster: Send + Sync + Debug {
    fn info(&self) -> &ModelInfo;

    fn forecast(&self, group: &str, history: &[f64], horizon: usize) -> Result<Vec<f64>>;
}

/// Serializable form of every persistable model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredModel {
    Logistic(LogisticModel),
    TreeEnsemble(TreeEnsembleModel),
    External(ExternalDescriptor),
    Autoregressive(ArForecaster),
}

/// A model handle of either family.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Tabular(Arc<dyn Predictor>),
    Forecast(Arc<dyn Forecaster>),
}

impl AnyModel {
    pub fn info(&self) -> &ModelInfo {
        match self {
            AnyModel::Tabular(p) => p.info(),
            AnyModel::Forecast(f) => f.info(),
        }
    }
}

impl StoredModel {
    pub fn into_model(self) -> Result<AnyModel> {
        Ok(match self {
            StoredModel::Logistic(m) => AnyModel::Tabular(Arc::new(m)),
            StoredModel::TreeEnsemble(m) => AnyModel::Tabular(Arc::new(m)),
            StoredModel::External(d) => AnyModel::Tabular(Arc::new(ExternalModel::new(d))),
            StoredModel::Autoregressive(m) => AnyModel::Forecast(Arc::new(m)),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            StoredModel::Logistic(m) => &m.info().name,
            StoredModel::TreeEnsemble(m) => &m.info().name,
            StoredModel::External(d) => &d.info.name,
            StoredModel::Autoregressive(m) => &m.info().name,
        }
    }
}

/// Hard labels at the model's threshold.
pub fn hard_labels(model: &dyn Predictor, scores: &[f64]) -> Vec<u8> {
    let t = model.info().threshold;
    scores.iter().map(|&s| u8::from(s >= t)).collect()
}

/// Fraction of rows whose hard label matches the binary outcome.
pub fn accuracy(model: &dyn Predictor, data: &Dataset) -> Result<f64> {
    let scores = predict_dataset(model, data)?;
    let labels = hard_labels(model, &scores);
    let truth = data.outcome_values();
    let hits = labels
        .iter()
        .zip(&truth)
        .filter(|(l, t)| f64::from(**l) == **t)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}
