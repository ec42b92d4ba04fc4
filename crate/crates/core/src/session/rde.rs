use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{forecast, Domain, Session, TabularDomain};
use crate::artifact::to_value;
use crate::baselines::{make_biased_baseline, make_random_baseline};
use crate::error::{Error, Result};
use crate::models::{accuracy, predict_dataset, Predictor, Task};
use crate::rating::{
    compute_ate, compute_wrs, resemblance, Adjustment, AteResult, BaselineScores, Metric, RatingReport, Subject,
    TreatmentDef,
};
use crate::tabular::{partition_by, CausalSpec, Dataset};
use crate::timeseries::{ForecastMetrics, PerturbationKind};

/// Parameters shared by every rating question. Fields a category does not
/// use are rejected by the caller.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingParams {
    /// Metric for baseline-resemblance questions; fixed by the category
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    /// Partition attribute for WRS; defaults to the first protected one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment: Option<TreatmentDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjust: Option<Adjustment>,
    /// Test models to rate; all registered ones by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<String>>,
    /// Forecasting: the perturbation arm to rate or contrast with `none`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationKind>,
    /// Forecasting: restrict to these companies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companies: Option<Vec<String>>,
    /// Also report predictive accuracy of every model.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub accuracy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Accuracy {
    Classification { accuracy: f64 },
    Forecast(ForecastMetrics),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdeResult {
    pub rating: RatingReport,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub accuracy: BTreeMap<String, Accuracy>,
}

pub(crate) const RANDOM: &str = "random_baseline";
pub(crate) const BIASED: &str = "biased_baseline";

/// One rated subject: its name, headline score and full result.
pub(crate) struct Scored {
    pub name: String,
    pub score: f64,
    pub detail: Value,
}

pub(crate) fn headline(metric: Metric, r: &AteResult) -> f64 {
    match metric {
        Metric::Die => r.die_percent.unwrap_or(f64::NAN),
        _ => r.ate,
    }
}

/// Scores of test models followed by the random and the biased baseline
/// (in that order) assembled into a report with verdicts.
pub(crate) fn assemble(
    metric: Metric,
    spec: CausalSpec,
    treatment: Option<TreatmentDef>,
    mut scored: Vec<Scored>,
    config: Value,
    session: &Session,
) -> Result<RatingReport> {
    let biased = scored.pop().expect("biased baseline scored");
    let random = scored.pop().expect("random baseline scored");
    let baselines = BaselineScores {
        random: random.score,
        biased: biased.score,
    };
    let verdicts = scored
        .iter()
        .map(|s| (s.name.clone(), resemblance(s.score, &baselines, session.settings.distinct_frac)))
        .collect();
    let mut warnings = session.warnings();
    for s in scored.iter().chain([&random, &biased]) {
        if !s.score.is_finite() {
            warnings.push(format!("{} score is not finite", s.name));
        }
    }
    if baselines.random == baselines.biased {
        warnings.push("the random and biased baselines score the same; verdicts cannot separate them".into());
    }
    let mut details = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for s in scored.into_iter().chain([random, biased]) {
        scores.insert(s.name.clone(), s.score);
        details.insert(s.name, s.detail);
    }
    Ok(RatingReport {
        metric,
        spec,
        treatment,
        scores,
        baselines: Some(baselines),
        verdicts,
        details,
        config,
        seed: session.settings.seed,
        warnings,
    })
}

impl RatingParams {
    pub(crate) fn require_treatment(&self, context: &str) -> Result<TreatmentDef> {
        self.treatment.clone().ok_or_else(|| Error::InvalidParams {
            category: context.to_string(),
            message: "missing `treatment`".into(),
        })
    }

    pub(crate) fn adjust_for(&self, metric: Metric) -> Adjustment {
        self.adjust.unwrap_or(match metric {
            Metric::Die => Adjustment::Gcomp,
            _ => Adjustment::None,
        })
    }
}

impl Session {
    /// Rate every selected test model and both reference models on
    /// `metric`, with a resemblance verdict per test model.
    pub fn run_rde(&mut self, metric: Metric, params: &RatingParams) -> Result<RdeResult> {
        match &self.domain {
            Domain::Tabular(d) => tabular(self, d, metric, params),
            Domain::Forecasting(_) => forecast::run_rde(self, metric, params),
        }
    }
}

pub(crate) fn select_models<'a, M: ?Sized>(
    models: &'a [(String, Arc<M>)],
    wanted: Option<&[String]>,
) -> Result<Vec<(&'a str, &'a Arc<M>)>> {
    match wanted {
        None => Ok(models.iter().map(|(n, m)| (n.as_str(), m)).collect()),
        Some(w) if w.is_empty() => Err(Error::InvalidConfig("empty model list".into())),
        Some(w) => w
            .iter()
            .map(|name| {
                models
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(n, m)| (n.as_str(), m))
                    .ok_or_else(|| Error::UnknownModel(name.clone()))
            })
            .collect(),
    }
}

pub(crate) fn protected_attribute(params: &RatingParams, spec: &CausalSpec) -> Result<String> {
    params
        .protected
        .clone()
        .or_else(|| spec.protected.first().cloned())
        .ok_or_else(|| Error::InvalidCausalSpec("no protected attribute to partition on".into()))
}

fn tabular(session: &Session, d: &TabularDomain, metric: Metric, params: &RatingParams) -> Result<RdeResult> {
    let data = d.audit_data()?;
    let models = select_models(&d.models, params.models.as_deref())?;
    let task = models[0].1.info().task;
    let random = make_random_baseline(task, &session.baselines.random, Some(&data.outcome_values()))?;
    let spec = session.spec.clone();

    let (treatment, config, scorer): (Option<TreatmentDef>, Value, Box<dyn Fn(&dyn Predictor) -> Result<(f64, Value)>>) =
        match metric {
            Metric::Wrs => {
                let attribute = protected_attribute(params, &spec)?;
                let partition = partition_by(&data, &attribute)?;
                let wrs = session.settings.wrs.clone();
                let config = json!({ "attribute": attribute, "wrs": wrs });
                let data = &data;
                (
                    None,
                    config,
                    Box::new(move |m: &dyn Predictor| {
                        let r = compute_wrs(&predict_dataset(m, data)?, &partition, &wrs)?;
                        Ok((r.psi, to_value(&r)?))
                    }),
                )
            }
            Metric::Ate | Metric::Die => {
                let def = params.require_treatment(metric.as_str())?;
                let adjust = params.adjust_for(metric);
                let ate = session.settings.ate.clone();
                let config = json!({ "adjust": adjust, "ate": ate });
                let (data, spec, def2) = (&data, spec.clone(), def.clone());
                (
                    Some(def),
                    config,
                    Box::new(move |m: &dyn Predictor| {
                        let r = compute_ate(data, Subject::Model(m), &spec, &def2, adjust, &ate)?;
                        Ok((headline(metric, &r), to_value(&r)?))
                    }),
                )
            }
        };

    let biased_attribute = match &session.baselines.biased.protected {
        Some(a) => a.clone(),
        None if metric == Metric::Wrs => protected_attribute(params, &spec)?,
        None => spec
            .protected
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidCausalSpec("the biased baseline needs a protected attribute".into()))?,
    };
    let biased = make_biased_baseline(&data, &partition_by(&data, &biased_attribute)?, task, &session.baselines.biased)?;

    let mut scored = Vec::new();
    let mut acc = BTreeMap::new();
    let subjects: Vec<(&str, &dyn Predictor)> = models
        .iter()
        .map(|(n, m)| (*n, m.as_ref() as &dyn Predictor))
        .chain([(RANDOM, &random as &dyn Predictor), (BIASED, &biased as &dyn Predictor)])
        .collect();
    for (name, m) in subjects {
        let (score, detail) = scorer(m)?;
        scored.push(Scored {
            name: name.to_string(),
            score,
            detail,
        });
        if params.accuracy && task == Task::BinaryClassification {
            acc.insert(name.to_string(), Accuracy::Classification { accuracy: accuracy(m, &data)? });
        }
    }
    let rating = assemble(metric, spec, treatment, scored, config, session)?;
    Ok(RdeResult { rating, accuracy: acc })
}

/// Rows of `data` whose categorical `column` carries one of `labels`.
pub(crate) fn rows_with_labels(data: &Dataset, column: &str, labels: &[&str]) -> Result<Dataset> {
    let c = data.column_index(column)?;
    let rows: Vec<usize> = (0..data.n_rows())
        .filter(|&i| data.label(i, c).is_some_and(|l| labels.contains(&l)))
        .collect();
    data.select_rows(&rows)
}
