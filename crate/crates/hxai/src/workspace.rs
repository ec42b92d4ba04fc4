//! File-backed registry of datasets, models and baseline configs under a
//! work directory, and the session construction shared by the CLI and the
//! HTTP service.
//!
//! Layout:
//! `datasets/<id>/record.json` with `data.csv` (+ `schema.json`) or
//! `series.csv`; `models/<name>.json`; `baselines/<id>.json`.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use hxai_core::io::{self, SchemaDescriptor};
use hxai_core::models::{
    train_forecaster_pooled, train_logistic, train_tree_ensemble, AnyModel, Forecaster, Predictor, StoredModel,
};
use hxai_core::session::{BaselineSettings, ModelSpec, Role, ScenarioBaselines, Session, SessionSettings, Split};
use hxai_core::tabular::{CausalSpec, Dataset};
use hxai_core::timeseries::{load_series_csv, synthetic_market, write_series_csv, AuditFrameConfig, Series};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetUpload {
    /// Headed CSV text plus its schema sidecar.
    Csv { csv: String, schema: SchemaDescriptor },
    /// `date, close, company` CSV text.
    SeriesCsv { csv: String },
    /// Bundled German Credit with derived `Sex` and `Age group`.
    GermanCredit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        age_threshold: Option<f64>,
    },
    SyntheticMarket {
        #[serde(default = "default_days")]
        days: usize,
        #[serde(default = "default_start")]
        start: NaiveDate,
        #[serde(default = "default_market_seed")]
        seed: u64,
    },
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
pub struct DatasetRequest {
    pub id: String,
    #[serde(flatten)]
    pub upload: DatasetUpload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Tabular,
    Series,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub kind: DatasetKind,
    /// Rows of a tabular dataset, series count otherwise.
    pub rows: usize,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    /// Features that models train on when none are named.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_features: Option<Vec<String>>,
    /// SHA-256 of the stored data file.
    pub sha256: String,
}

pub enum Loaded {
    Tabular(Dataset),
    Series(Vec<Series>),
}

/// Train a built-in model or register an external or stored one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    /// Training data; not needed for external or stored models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Train on the complement of the held-out rows only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub model: StoredModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselinesRequest {
    pub id: String,
    #[serde(flatten)]
    pub baselines: ScenarioBaselines,
}

/// Reference-model settings: a registered id or an inline config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaselineChoice {
    Named(String),
    Inline(ScenarioBaselines),
}

/// Which rows ratings and global explanations use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditRows {
    All,
    /// Rows held out by the first model's split.
    Test,
}

fn default_role() -> Role {
    Role::Individual
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    /// Assigned by the service when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default = "default_role")]
    pub role: Role,
    pub dataset: String,
    pub models: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal_spec: Option<CausalSpec>,
    /// Protected attributes for the default causal spec.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub protected: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SessionSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BaselineChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<AuditFrameConfig>,
    /// Defaults to `test` when the first model was trained on a split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditRows>,
}

/// Ids become directory and file names.
pub fn check_id(what: &str, id: &str) -> AppResult<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(AppError::Usage(format!(
            "{what} id `{id}` must be 1-64 characters of letters, digits, `_`, `-` or `.`"
        )))
    }
}

fn read(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("record serializes");
    s.push(b'\n');
    s
}

/// Write a file that must not exist yet.
fn create_new(path: &Path, bytes: &[u8], what: &'static str, id: &str) -> AppResult<()> {
    use std::io::Write;
    let mut f = match fs::OpenOptions::new().write(true).create_new(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == ErrorKind::AlreadyExists => {
            return Err(AppError::Conflict { what, id: id.to_string() })
        }
        Err(e) => return Err(e.into()),
    };
    f.write_all(bytes)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative paths are taken relative to the work directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(id)
    }

    fn model_path(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.json"))
    }

    fn baselines_path(&self, id: &str) -> PathBuf {
        self.root.join("baselines").join(format!("{id}.json"))
    }

    /// Parse, validate and store a dataset. Registered datasets are
    /// immutable: a second upload under the same id is a conflict.
    pub fn add_dataset(&self, req: &DatasetRequest) -> AppResult<DatasetRecord> {
        check_id("dataset", &req.id)?;
        let (kind, bytes, schema, columns, rows, default_features) = match &req.upload {
            DatasetUpload::Csv { csv, schema } => {
                let data = io::load_csv(csv.as_bytes(), schema)?;
                let columns = data.schema().iter().map(|f| f.name.clone()).collect();
                (DatasetKind::Tabular, csv.clone().into_bytes(), Some(schema.clone()), columns, data.n_rows(), None)
            }
            DatasetUpload::GermanCredit { age_threshold } => {
                let raw = io::german_credit()?.dataset;
                let outcome = raw.outcome_name().to_string();
                let features: Vec<String> = raw.feature_names().into_iter().filter(|f| *f != outcome).collect();
                let data = io::audit_frame(&raw, *age_threshold)?;
                let mut buf = Vec::new();
                io::write_csv(&data, &mut buf)?;
                let columns = data.schema().iter().map(|f| f.name.clone()).collect();
                (DatasetKind::Tabular, buf, Some(SchemaDescriptor::of(&data)), columns, data.n_rows(), Some(features))
            }
            DatasetUpload::SeriesCsv { csv } => {
                let series = load_series_csv(csv.as_bytes())?;
                let columns = series.iter().map(|s| s.company.clone()).collect();
                (DatasetKind::Series, csv.clone().into_bytes(), None, columns, series.len(), None)
            }
            DatasetUpload::SyntheticMarket { days, start, seed } => {
                let series = synthetic_market(*days, *start, *seed);
                let mut buf = Vec::new();
                write_series_csv(&series, &mut buf)?;
                let columns = series.iter().map(|s| s.company.clone()).collect();
                (DatasetKind::Series, buf, None, columns, series.len(), None)
            }
        };
        let record = DatasetRecord {
            id: req.id.clone(),
            kind,
            rows,
            columns,
            outcome: schema.as_ref().map(|s| s.outcome.clone()),
            default_features,
            sha256: io::sha256_hex(&bytes),
        };
        fs::create_dir_all(self.root.join("datasets"))?;
        let dir = self.dataset_dir(&req.id);
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(AppError::Conflict {
                    what: "dataset",
                    id: req.id.clone(),
                })
            }
            Err(e) => return Err(e.into()),
        }
        match kind {
            DatasetKind::Tabular => {
                fs::write(dir.join("data.csv"), &bytes)?;
                fs::write(dir.join("schema.json"), pretty(&schema))?;
            }
            DatasetKind::Series => fs::write(dir.join("series.csv"), &bytes)?,
        }
        // written last: its presence marks a complete upload
        fs::write(dir.join("record.json"), pretty(&record))?;
        Ok(record)
    }

    pub fn dataset_record(&self, id: &str) -> AppResult<DatasetRecord> {
        check_id("dataset", id)?;
        let path = self.dataset_dir(id).join("record.json");
        if !path.exists() {
            return Err(AppError::NotFound {
                what: "dataset",
                id: id.to_string(),
            });
        }
        read_json(&path)
    }

    pub fn dataset(&self, id: &str) -> AppResult<(DatasetRecord, Loaded)> {
        let record = self.dataset_record(id)?;
        let dir = self.dataset_dir(id);
        let loaded = match record.kind {
            DatasetKind::Tabular => {
                let schema: SchemaDescriptor = read_json(&dir.join("schema.json"))?;
                Loaded::Tabular(io::load_csv(read(&dir.join("data.csv"))?.as_slice(), &schema)?)
            }
            DatasetKind::Series => Loaded::Series(load_series_csv(read(&dir.join("series.csv"))?.as_slice())?),
        };
        Ok((record, loaded))
    }

    /// Train (or register) a model and store it under its name.
    pub fn add_model(&self, req: &ModelRequest) -> AppResult<ModelRecord> {
        let name = match &req.spec {
            ModelSpec::Logistic { name, .. }
            | ModelSpec::TreeEnsemble { name, .. }
            | ModelSpec::Autoregressive { name, .. } => name.clone(),
            ModelSpec::External(d) => d.info.name.clone(),
            ModelSpec::Stored { path, name } => match name {
                Some(n) => n.clone(),
                None => read_json::<StoredModel>(&self.resolve(path))?.name().to_string(),
            },
        };
        check_id("model", &name)?;
        if self.model_path(&name).exists() {
            return Err(AppError::Conflict { what: "model", id: name });
        }
        let needs_data = matches!(
            req.spec,
            ModelSpec::Logistic { .. } | ModelSpec::TreeEnsemble { .. } | ModelSpec::Autoregressive { .. }
        );
        let loaded = match (&req.dataset, needs_data) {
            (Some(id), _) => Some(self.dataset(id)?),
            (None, true) => return Err(AppError::Usage(format!("model `{name}` needs a training dataset"))),
            (None, false) => None,
        };
        if req.split.is_some() && !matches!(loaded, Some((_, Loaded::Tabular(_)))) {
            return Err(AppError::Usage("`split` applies to tabular training data".into()));
        }
        let training_rows = |data: &Dataset| -> AppResult<Dataset> {
            Ok(match &req.split {
                Some(s) => data.select_rows(&s.apply(data.n_rows())?.0)?,
                None => data.clone(),
            })
        };
        let model = match (&req.spec, &loaded) {
            (ModelSpec::Logistic { name, config, features }, Some((record, Loaded::Tabular(data)))) => {
                let train = training_rows(data)?;
                let features = features.as_deref().or(record.default_features.as_deref());
                StoredModel::Logistic(
                    train_logistic(&train, data.outcome_name(), features, config)?.rename(name.clone()),
                )
            }
            (ModelSpec::TreeEnsemble { name, config, features }, Some((record, Loaded::Tabular(data)))) => {
                let train = training_rows(data)?;
                let features = features.as_deref().or(record.default_features.as_deref());
                StoredModel::TreeEnsemble(
                    train_tree_ensemble(&train, data.outcome_name(), features, config)?.rename(name.clone()),
                )
            }
            (ModelSpec::Autoregressive { name, config }, Some((_, Loaded::Series(series)))) => {
                let closes: Vec<&[f64]> = series.iter().map(|s| s.close.as_slice()).collect();
                StoredModel::Autoregressive(train_forecaster_pooled(&closes, config)?.rename(name.clone()))
            }
            (ModelSpec::External(d), _) => StoredModel::External(d.clone()),
            (ModelSpec::Stored { path, .. }, _) => read_json(&self.resolve(path))?,
            (ModelSpec::Autoregressive { .. }, _) => {
                return Err(AppError::Usage("autoregressive models train on a series dataset".into()))
            }
            _ => return Err(AppError::Usage(format!("model `{name}` trains on a tabular dataset"))),
        };
        let record = ModelRecord {
            name: name.clone(),
            dataset: req.dataset.clone(),
            split: req.split.clone(),
            model,
        };
        fs::create_dir_all(self.root.join("models"))?;
        create_new(&self.model_path(&name), &pretty(&record), "model", &name)?;
        Ok(record)
    }

    pub fn model(&self, name: &str) -> AppResult<ModelRecord> {
        check_id("model", name)?;
        let path = self.model_path(name);
        if !path.exists() {
            return Err(AppError::NotFound {
                what: "model",
                id: name.to_string(),
            });
        }
        read_json(&path)
    }

    pub fn add_baselines(&self, req: &BaselinesRequest) -> AppResult<()> {
        check_id("baselines", &req.id)?;
        fs::create_dir_all(self.root.join("baselines"))?;
        create_new(&self.baselines_path(&req.id), &pretty(&req.baselines), "baselines", &req.id)
    }

    pub fn baselines(&self, id: &str) -> AppResult<ScenarioBaselines> {
        check_id("baselines", id)?;
        let path = self.baselines_path(id);
        if !path.exists() {
            return Err(AppError::NotFound {
                what: "baselines",
                id: id.to_string(),
            });
        }
        read_json(&path)
    }

    /// Build a session from registered data and models.
    pub fn open_session(&self, id: &str, req: &SessionRequest) -> AppResult<Session> {
        if req.models.is_empty() {
            return Err(AppError::Usage("a session needs at least one model".into()));
        }
        let (_, loaded) = self.dataset(&req.dataset)?;
        let records = req.models.iter().map(|m| self.model(m)).collect::<AppResult<Vec<_>>>()?;
        let settings = req.settings.clone().unwrap_or_default().with_seed(req.seed);
        let mut baselines = BaselineSettings::seeded(req.seed);
        let chosen = match &req.baselines {
            Some(BaselineChoice::Named(id)) => Some(self.baselines(id)?),
            Some(BaselineChoice::Inline(b)) => Some(b.clone()),
            None => None,
        };
        if let Some(b) = chosen {
            if let Some(r) = b.random {
                baselines.random = r;
            }
            if let Some(b) = b.biased {
                baselines.biased = b;
            }
        }
        let mut models = Vec::new();
        for r in &records {
            models.push((r.name.clone(), r.model.clone().into_model()?));
        }
        let session = match loaded {
            Loaded::Tabular(data) => {
                if req.frame.is_some() {
                    return Err(AppError::Usage("`frame` applies to series datasets".into()));
                }
                let models: Vec<(String, Arc<dyn Predictor>)> = models
                    .into_iter()
                    .map(|(n, m)| match m {
                        AnyModel::Tabular(p) => Ok((n, p)),
                        AnyModel::Forecast(_) => Err(AppError::Usage(format!("`{n}` is a forecaster; the dataset is tabular"))),
                    })
                    .collect::<AppResult<_>>()?;
                let split = records[0].split.as_ref();
                let audit_rows = match (req.audit, split) {
                    (Some(AuditRows::All), _) | (None, None) => None,
                    (Some(AuditRows::Test) | None, Some(s)) => Some(s.apply(data.n_rows())?.1),
                    (Some(AuditRows::Test), None) => {
                        return Err(AppError::Usage(format!(
                            "`{}` was trained without a split; there are no test rows",
                            records[0].name
                        )))
                    }
                };
                Session::tabular(
                    id,
                    req.role,
                    data,
                    audit_rows,
                    models,
                    req.causal_spec.clone(),
                    &req.protected,
                    settings,
                )?
            }
            Loaded::Series(series) => {
                if req.causal_spec.is_some() || req.audit.is_some() {
                    return Err(AppError::Usage(
                        "series sessions take neither `causal_spec` nor `audit`".into(),
                    ));
                }
                let models: Vec<(String, Arc<dyn Forecaster>)> = models
                    .into_iter()
                    .map(|(n, m)| match m {
                        AnyModel::Forecast(f) => Ok((n, f)),
                        AnyModel::Tabular(_) => Err(AppError::Usage(format!("`{n}` is a tabular model; the dataset is a set of series"))),
                    })
                    .collect::<AppResult<_>>()?;
                Session::forecasting(id, req.role, series, models, req.frame.clone().unwrap_or_default(), settings)?
            }
        };
        Ok(session.with_baselines(baselines))
    }
}
