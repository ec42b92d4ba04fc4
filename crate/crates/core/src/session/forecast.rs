//! Forecasting side of a session: audit frames and surrogates per model,
//! the reference forecasters, and lag-level what-if questions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::rde::{assemble, headline, rows_with_labels, select_models, Accuracy, RatingParams, RdeResult, Scored, BIASED, RANDOM};
use super::{BaselineSettings, Domain, ForecastDomain, Session};
use crate::artifact::to_value;
use crate::baselines::{make_biased_forecaster, make_random_forecaster};
use crate::error::{Error, Result};
use crate::explain::{
    background_rows, fit_ts_surrogate, lag_names, tree_shap, Fidelity, GlobalShap, ShapResult, SurrogateConfig,
    TsSurrogate,
};
use crate::models::{check_width, Forecaster, ModelInfo, Predictor, Provenance, Task};
use crate::rating::{compute_ate, compute_wrs, Level, Metric, Subject, TreatmentDef};
use crate::stats::mean;
use crate::tabular::{partition_by, CausalSpec, Cell, Dataset, FeatureSchema};
use crate::timeseries::{
    forecast_audit_frame, forecast_metrics_scaled, impute, naive_scale, sliding_window, AuditFrameConfig,
    ForecastMetrics, Imputation, PerturbationKind, Series, WindowSet, COMPANY, PERTURBATION, RESIDUAL,
};

/// Outcome column of the lag frame: the next observed close.
pub const NEXT: &str = "next";

#[derive(Default)]
pub(crate) struct Cache {
    frames: BTreeMap<String, Dataset>,
    surrogates: BTreeMap<String, TsSurrogate>,
}

pub(crate) fn spec() -> CausalSpec {
    CausalSpec::new(PERTURBATION, RESIDUAL, [COMPANY])
}

/// Surrogate attribution of one forecast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateShap {
    pub model: String,
    pub company: String,
    /// Start index of the explained history in the company's series.
    pub window: usize,
    /// One-step forecast of the base model for this history.
    pub forecast: f64,
    pub shap: ShapResult,
    pub fidelity: Fidelity,
}

/// Share of total mean |φ| carried by the most recent lags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagSummary {
    pub recent_lags: usize,
    pub recent_share: f64,
    pub long_term_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub model: String,
    pub global: GlobalShap,
    pub lags: LagSummary,
    pub fidelity: Fidelity,
}

fn domain(session: &mut Session) -> &mut ForecastDomain {
    match &mut session.domain {
        Domain::Forecasting(d) => d,
        Domain::Tabular(_) => unreachable!("caller checked the domain"),
    }
}

fn pooled_closes(series: &[Series]) -> Vec<f64> {
    series.iter().flat_map(|s| s.close.iter().copied()).collect()
}

fn reference_forecasters(
    d: &ForecastDomain,
    b: &BaselineSettings,
) -> Result<[(String, Arc<dyn Forecaster>); 2]> {
    let observed = pooled_closes(&d.series);
    let random = make_random_forecaster(&b.random, Some(&observed))?;
    let groups: Vec<&str> = d.series.iter().map(|s| s.company.as_str()).collect();
    let biased = make_biased_forecaster(d.models[0].1.clone(), &groups, &b.biased, &observed)?;
    Ok([(RANDOM.to_string(), Arc::new(random)), (BIASED.to_string(), Arc::new(biased))])
}

fn frame<'a>(
    cache: &'a mut Cache,
    series: &[Series],
    config: &AuditFrameConfig,
    name: &str,
    model: &dyn Forecaster,
) -> Result<&'a Dataset> {
    if !cache.frames.contains_key(name) {
        let f = forecast_audit_frame(model, series, config)?;
        cache.frames.insert(name.to_string(), f);
    }
    Ok(&cache.frames[name])
}

fn check_companies(series: &[Series], companies: Option<&[String]>) -> Result<()> {
    for c in companies.unwrap_or_default() {
        if !series.iter().any(|s| s.company == *c) {
            return Err(Error::InvalidConfig(format!("unknown company `{c}`")));
        }
    }
    Ok(())
}

fn restrict(frame: &Dataset, companies: Option<&[String]>, arms: &[&str]) -> Result<Dataset> {
    let data = rows_with_labels(frame, PERTURBATION, arms)?;
    match companies {
        Some(c) => {
            let labels: Vec<&str> = c.iter().map(String::as_str).collect();
            rows_with_labels(&data, COMPANY, &labels)
        }
        None => Ok(data),
    }
}

/// Mean SMAPE and MASE over companies of the full-horizon forecasts of
/// every unperturbed window.
pub(crate) fn forecast_accuracy(model: &dyn Forecaster, series: &[Series], config: &AuditFrameConfig) -> Result<ForecastMetrics> {
    let mut smape = Vec::new();
    let mut mase = Vec::new();
    for s in series {
        let set = sliding_window(&s.close, config.history_len, config.horizon, &s.company)?;
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for w in &set.windows {
            pred.extend(model.forecast(&s.company, &impute(&w.input, config.imputation), config.horizon)?);
            truth.extend_from_slice(&w.target);
        }
        let m = forecast_metrics_scaled(&pred, &truth, naive_scale(&s.close)?)?;
        smape.push(m.smape);
        mase.push(m.mase);
    }
    Ok(ForecastMetrics {
        smape: mean(&smape),
        mase: mean(&mase),
    })
}

pub(crate) fn run_rde(session: &mut Session, metric: Metric, params: &RatingParams) -> Result<RdeResult> {
    let spec = spec();
    let baselines = session.baselines.clone();
    let ate_config = session.settings.ate.clone();
    let wrs_config = session.settings.wrs.clone();
    let adjust = params.adjust_for(metric);
    let kind = params.perturbation.unwrap_or_default();

    let d = domain(session);
    check_companies(&d.series, params.companies.as_deref())?;
    if kind != PerturbationKind::None && !d.frame.perturbations.iter().any(|p| p.kind == kind) {
        return Err(Error::InvalidConfig(format!(
            "perturbation `{}` is not part of this session's audit frame",
            kind.as_str()
        )));
    }
    let (arms, treatment, config) = match metric {
        Metric::Wrs => (vec![kind.as_str()], None, json!({ "arm": kind, "attribute": COMPANY, "wrs": wrs_config })),
        Metric::Ate | Metric::Die => {
            let def = match &params.treatment {
                Some(def) => def.clone(),
                None if kind == PerturbationKind::None => {
                    return Err(Error::InvalidParams {
                        category: metric.as_str().into(),
                        message: "a forecasting effect needs `perturbation` or `treatment`".into(),
                    })
                }
                None => TreatmentDef::contrast(Level::Label(kind.as_str().into()), Level::Label("none".into())),
            };
            let arms = match &def {
                TreatmentDef::ObservationalContrast { p, p0 } => [p, p0]
                    .into_iter()
                    .map(|l| match l {
                        Level::Label(s) => s.parse::<PerturbationKind>().map(|k| k.as_str()),
                        Level::Value(v) => Err(Error::InvalidConfig(format!("`{v}` is not a perturbation arm"))),
                    })
                    .collect::<Result<Vec<_>>>()?,
                TreatmentDef::InterventionalTransform { .. } => {
                    return Err(Error::InvalidCausalSpec(
                        "the perturbation arm is categorical; use an observational contrast".into(),
                    ))
                }
            };
            (arms, Some(def), json!({ "adjust": adjust, "ate": ate_config }))
        }
    };

    let mut subjects: Vec<(String, Arc<dyn Forecaster>)> = select_models(&d.models, params.models.as_deref())?
        .into_iter()
        .map(|(n, m)| (n.to_string(), m.clone()))
        .collect();
    subjects.extend(reference_forecasters(d, &baselines)?);

    let mut scored = Vec::new();
    let mut acc = BTreeMap::new();
    for (name, model) in &subjects {
        let full = frame(&mut d.cache, &d.series, &d.frame, name, model.as_ref())?;
        let data = restrict(full, params.companies.as_deref(), &arms)?;
        let (score, detail) = match (&treatment, metric) {
            (None, _) => {
                let partition = partition_by(&data, COMPANY)?;
                let r = compute_wrs(&data.column(RESIDUAL)?, &partition, &wrs_config)?;
                (r.psi, to_value(&r)?)
            }
            (Some(def), _) => {
                let r = compute_ate(&data, Subject::Observed, &spec, def, adjust, &ate_config)?;
                (headline(metric, &r), to_value(&r)?)
            }
        };
        scored.push(Scored {
            name: name.clone(),
            score,
            detail,
        });
        if params.accuracy {
            acc.insert(name.clone(), Accuracy::Forecast(forecast_accuracy(model.as_ref(), &d.series, &d.frame)?));
        }
    }
    let rating = assemble(metric, spec, treatment, scored, config, session)?;
    Ok(RdeResult { rating, accuracy: acc })
}

fn one_step_windows(series: &[Series], history_len: usize) -> Result<Vec<WindowSet>> {
    series
        .iter()
        .map(|s| sliding_window(&s.close, history_len, 1, &s.company))
        .collect()
}

fn surrogate<'a>(
    cache: &'a mut Cache,
    series: &[Series],
    history_len: usize,
    name: &str,
    model: &dyn Forecaster,
    config: &SurrogateConfig,
) -> Result<&'a TsSurrogate> {
    if !cache.surrogates.contains_key(name) {
        let s = fit_ts_surrogate(model, &one_step_windows(series, history_len)?, config)?;
        cache.surrogates.insert(name.to_string(), s);
    }
    Ok(&cache.surrogates[name])
}

/// One row per one-step window: the lags, the company and the next close.
fn lag_frame(series: &[Series], history_len: usize) -> Result<Dataset> {
    let mut companies: Vec<String> = series.iter().map(|s| s.company.clone()).collect();
    companies.sort();
    let mut rows = Vec::new();
    for set in one_step_windows(series, history_len)? {
        let c = companies.binary_search(&set.company).expect("listed") as u32;
        for w in set.windows {
            let mut row: Vec<Cell> = w.input.iter().map(|&v| Cell::Num(v)).collect();
            row.push(Cell::Cat(c));
            row.push(Cell::Num(w.target[0]));
            rows.push(row);
        }
    }
    if companies.len() < 2 {
        companies.push("(other)".into());
    }
    let mut schema: Vec<FeatureSchema> = lag_names(history_len).into_iter().map(FeatureSchema::numeric).collect();
    schema.push(FeatureSchema::categorical(COMPANY, companies).immutable());
    schema.push(FeatureSchema::numeric(NEXT));
    Dataset::new(schema, rows, NEXT)
}

/// A forecaster's one-step forecast seen as a predictor over lag rows.
#[derive(Debug)]
struct OneStep {
    info: ModelInfo,
    base: Arc<dyn Forecaster>,
    companies: Vec<String>,
    history_len: usize,
    imputation: Imputation,
}

impl OneStep {
    fn new(base: Arc<dyn Forecaster>, lag_data: &Dataset, history_len: usize, imputation: Imputation) -> Result<Self> {
        let mut features = lag_names(history_len);
        features.push(COMPANY.to_string());
        Ok(OneStep {
            info: ModelInfo::new(base.info().name.clone(), Task::Regression, Provenance::Builtin, features),
            companies: lag_data.feature(COMPANY)?.categories.clone(),
            base,
            history_len,
            imputation,
        })
    }
}

impl Predictor for OneStep {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_width(rows, self.history_len + 1)?;
        rows.iter()
            .map(|r| {
                let company = &self.companies[r[self.history_len] as usize];
                let history = impute(&r[..self.history_len], self.imputation);
                Ok(self.base.forecast(company, &history, 1)?[0])
            })
            .collect()
    }
}

fn forecaster<'a>(d: &'a ForecastDomain, name: Option<&str>) -> Result<(&'a str, &'a Arc<dyn Forecaster>)> {
    match name {
        Some(n) => d
            .models
            .iter()
            .find(|(m, _)| m == n)
            .map(|(m, f)| (m.as_str(), f))
            .ok_or_else(|| Error::UnknownModel(n.to_string())),
        None => Ok((d.models[0].0.as_str(), &d.models[0].1)),
    }
}

pub(crate) fn local_shap(session: &mut Session, model: Option<&str>, company: &str, window: Option<usize>) -> Result<SurrogateShap> {
    let shap_cfg = session.settings.shap.clone();
    let sur_cfg = session.settings.surrogate.clone();
    let d = domain(session);
    let h = d.frame.history_len;
    let (name, base) = forecaster(d, model)?;
    let (name, base) = (name.to_string(), base.clone());
    let series = d
        .series
        .iter()
        .find(|s| s.company == company)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown company `{company}`")))?;
    if series.close.len() < h {
        return Err(Error::SeriesTooShort {
            needed: h,
            got: series.close.len(),
        });
    }
    let start = window.unwrap_or(series.close.len() - h);
    if start + h > series.close.len() {
        return Err(Error::InvalidConfig(format!("window {start} runs past the end of `{company}`")));
    }
    let history = series.close[start..start + h].to_vec();
    let lag_data = lag_frame(&d.series, h)?;
    let sur = surrogate(&mut d.cache, &d.series, h, &name, base.as_ref(), &sur_cfg)?;
    let row = sur.encode(&history)?;
    let background = background_rows(&sur.model, &lag_data, shap_cfg.background_size, shap_cfg.seed)?;
    let shap = tree_shap(&sur.model, &row, &background)?;
    Ok(SurrogateShap {
        model: name,
        company: company.to_string(),
        window: start,
        forecast: base.forecast(company, &row, 1)?[0],
        shap,
        fidelity: sur.fidelity.clone(),
    })
}

pub(crate) fn global_summary(session: &mut Session, model: Option<&str>, n_rows: usize, recent_lags: usize) -> Result<SurrogateSummary> {
    let shap_cfg = session.settings.shap.clone();
    let sur_cfg = session.settings.surrogate.clone();
    let d = domain(session);
    let h = d.frame.history_len;
    if recent_lags == 0 || recent_lags > h {
        return Err(Error::InvalidConfig(format!("recent_lags must lie in 1..={h}")));
    }
    let (name, base) = forecaster(d, model)?;
    let (name, base) = (name.to_string(), base.clone());
    let lag_data = lag_frame(&d.series, h)?;
    let sur = surrogate(&mut d.cache, &d.series, h, &name, base.as_ref(), &sur_cfg)?;
    let background = background_rows(&sur.model, &lag_data, shap_cfg.background_size, shap_cfg.seed)?;
    let rows = background_rows(&sur.model, &lag_data, n_rows, shap_cfg.seed.wrapping_add(1))?;
    let local = rows
        .iter()
        .map(|r| tree_shap(&sur.model, r, &background))
        .collect::<Result<Vec<_>>>()?;
    let global = GlobalShap::from_local(&local).ok_or_else(|| Error::InsufficientWindows { needed: 1, got: 0 })?;
    let total: f64 = global.mean_abs.iter().sum();
    // lag names run oldest first, so the recent lags are the tail
    let recent: f64 = global.mean_abs[h - recent_lags..].iter().sum();
    let recent_share = if total > 0.0 { recent / total } else { 0.0 };
    Ok(SurrogateSummary {
        model: name,
        global,
        lags: LagSummary {
            recent_lags,
            recent_share,
            long_term_share: if total > 0.0 { 1.0 - recent_share } else { 0.0 },
        },
        fidelity: sur.fidelity.clone(),
    })
}

/// Effect of a lag intervention on one-step forecasts, for every selected
/// model and both reference forecasters. Without a target feature the lag
/// with the largest global surrogate attribution of the first model is
/// used.
pub(crate) fn input_sensitivity(session: &mut Session, params: &RatingParams) -> Result<RdeResult> {
    let def = params.require_treatment("input_sensitivity")?;
    let TreatmentDef::InterventionalTransform { op, feature } = def else {
        return Err(Error::InvalidParams {
            category: "input_sensitivity".into(),
            message: "forecast what-ifs take an interventional transform on a lag".into(),
        });
    };
    let first = params.models.as_ref().and_then(|m| m.first().cloned());
    let feature = match feature {
        Some(f) => f,
        None => {
            let n = session.settings.global_rows;
            let summary = global_summary(session, first.as_deref(), n, 1)?;
            summary.global.ranked()[0].0.to_string()
        }
    };
    let def = TreatmentDef::InterventionalTransform {
        op,
        feature: Some(feature.clone()),
    };
    let adjust = params.adjust_for(Metric::Ate);
    let ate_config = session.settings.ate.clone();
    let baselines = session.baselines.clone();
    let d = domain(session);
    check_companies(&d.series, params.companies.as_deref())?;
    let h = d.frame.history_len;
    let imputation = d.frame.imputation;
    let all = lag_frame(&d.series, h)?;
    let data = match params.companies.as_deref() {
        Some(c) => rows_with_labels(&all, COMPANY, &c.iter().map(String::as_str).collect::<Vec<_>>())?,
        None => all,
    };
    let spec = CausalSpec::new(feature, NEXT, [COMPANY]);
    let mut subjects: Vec<(String, Arc<dyn Forecaster>)> = select_models(&d.models, params.models.as_deref())?
        .into_iter()
        .map(|(n, m)| (n.to_string(), m.clone()))
        .collect();
    subjects.extend(reference_forecasters(d, &baselines)?);
    let mut scored = Vec::new();
    for (name, model) in subjects {
        let p = OneStep::new(model, &data, h, imputation)?;
        let r = compute_ate(&data, Subject::Model(&p), &spec, &def, adjust, &ate_config)?;
        scored.push(Scored {
            name,
            score: r.ate,
            detail: to_value(&r)?,
        });
    }
    let config = json!({ "adjust": adjust, "ate": ate_config });
    let rating = assemble(Metric::Ate, spec, Some(def), scored, config, session)?;
    Ok(RdeResult {
        rating,
        accuracy: BTreeMap::new(),
    })
}
