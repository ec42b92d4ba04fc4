//! Dispatch of a routed question to the engine.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::question::{Category, Plan, Question};
use super::rde::RatingParams;
use super::{forecast, Domain, Session};
use crate::artifact::{ArtifactKind, ArtifactMetadata, ExplanationArtifact};
use crate::error::{Error, Result};
use crate::explain::{background_rows, compute_pdp, explain_shap, find_counterfactual, global_shap, ShapMethod};
use crate::rating::Metric;

/// A tabular explainer result tied to the model (and row) it explains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attributed<T> {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    pub result: T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PdpParams {
    feature: String,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    grid_size: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalParams {
    #[serde(default)]
    model: Option<String>,
    /// Tabular row index.
    #[serde(default)]
    instance: Option<usize>,
    /// Forecasting: series and history start (latest history by default).
    #[serde(default)]
    company: Option<String>,
    #[serde(default)]
    window: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GlobalParams {
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    n_rows: Option<usize>,
    /// Forecasting: how many of the latest lags count as recent.
    #[serde(default)]
    recent_lags: Option<usize>,
}

fn one() -> u8 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterfactualParams {
    instance: usize,
    #[serde(default = "one")]
    target_class: u8,
    /// Features the search may change; the schema's mutability otherwise.
    #[serde(default)]
    mutable: Option<Vec<String>>,
    #[serde(default)]
    model: Option<String>,
}

fn invalid(category: Category, message: impl Into<String>) -> Error {
    Error::InvalidParams {
        category: category.to_string(),
        message: message.into(),
    }
}

fn params<T: DeserializeOwned>(q: &Question) -> Result<T> {
    q.params()
}

fn rating_params(q: &Question) -> Result<(Metric, RatingParams)> {
    let p: RatingParams = params(q)?;
    let c = q.category;
    let metric = match c {
        Category::GroupDisparity => Metric::Wrs,
        Category::CausalInfluence | Category::InputSensitivity => Metric::Ate,
        Category::ConfoundingDistortion | Category::GroupPerturbationSensitivity => Metric::Die,
        Category::BaselineResemblance => p.metric.unwrap_or(Metric::Wrs),
        _ => unreachable!("not a rating category"),
    };
    if c != Category::BaselineResemblance && p.metric.is_some() {
        return Err(invalid(c, "the metric is fixed by the category"));
    }
    if metric == Metric::Wrs && (p.treatment.is_some() || p.adjust.is_some()) {
        return Err(invalid(c, "WRS takes no treatment or adjustment"));
    }
    Ok((metric, p))
}

fn kind_of(category: Category) -> ArtifactKind {
    match category {
        Category::GlobalFeatureEffect => ArtifactKind::Pdp,
        Category::LocalAttribution => ArtifactKind::Shap,
        Category::GlobalAttribution => ArtifactKind::GlobalShap,
        Category::MinimalChange => ArtifactKind::Counterfactual,
        Category::InputSensitivity => ArtifactKind::WhatIf,
        _ => ArtifactKind::Rating,
    }
}

fn shap_method(m: ShapMethod) -> &'static str {
    match m {
        ShapMethod::Exact => "exact",
        ShapMethod::Sampled => "sampled",
        ShapMethod::Tree => "tree",
        ShapMethod::Surrogate => "surrogate",
    }
}

pub(super) fn answer(session: &mut Session, q: &Question, plan: &Plan) -> Result<ExplanationArtifact> {
    let forecasting = matches!(session.domain, Domain::Forecasting(_));
    let mut warnings = session.warnings();
    let mut method = plan.methods[0].clone();
    let mut background_size = None;
    let seed = session.settings.seed;

    let values = match q.category {
        Category::GroupDisparity
        | Category::CausalInfluence
        | Category::ConfoundingDistortion
        | Category::GroupPerturbationSensitivity
        | Category::BaselineResemblance => {
            let (metric, p) = rating_params(q)?;
            let r = session.run_rde(metric, &p)?;
            warnings = r.rating.warnings.clone();
            serde_json::to_value(&r)
        }
        Category::InputSensitivity => {
            let (metric, p) = rating_params(q)?;
            let r = if forecasting {
                forecast::input_sensitivity(session, &p)?
            } else {
                if p.treatment.is_none() {
                    return Err(invalid(q.category, "missing `treatment`"));
                }
                session.run_rde(metric, &p)?
            };
            warnings = r.rating.warnings.clone();
            serde_json::to_value(&r)
        }
        Category::GlobalFeatureEffect => {
            let p: PdpParams = params(q)?;
            let (d, name, m) = session.tabular_model(p.model.as_deref())?;
            let pdp = compute_pdp(m.as_ref(), &d.audit_data()?, &p.feature, p.grid_size.unwrap_or(session.settings.pdp_grid))?;
            background_size = Some(pdp.n_background);
            serde_json::to_value(Attributed {
                model: name.to_string(),
                instance: None,
                result: pdp,
            })
        }
        Category::LocalAttribution => {
            let p: LocalParams = params(q)?;
            if forecasting {
                if p.instance.is_some() {
                    return Err(invalid(q.category, "forecasting sessions take `company` and `window`"));
                }
                let company = p.company.ok_or_else(|| invalid(q.category, "missing `company`"))?;
                let r = forecast::local_shap(session, p.model.as_deref(), &company, p.window)?;
                method = format!("{method}:surrogate_tree");
                background_size = Some(r.shap.background_size);
                serde_json::to_value(&r)
            } else {
                if p.company.is_some() || p.window.is_some() {
                    return Err(invalid(q.category, "tabular sessions take `instance`"));
                }
                let instance = p.instance.ok_or_else(|| invalid(q.category, "missing `instance`"))?;
                let (d, name, m) = session.tabular_model(p.model.as_deref())?;
                if instance >= d.data.n_rows() {
                    return Err(invalid(q.category, format!("instance {instance} out of range")));
                }
                let row = d.data.design(&m.info().features)?.swap_remove(instance);
                let cfg = &session.settings.shap;
                let background = background_rows(m.as_ref(), &d.audit_data()?, cfg.background_size, cfg.seed)?;
                let shap = explain_shap(m.as_ref(), &row, &background, cfg)?;
                method = format!("{method}:{}", shap_method(shap.method));
                background_size = Some(shap.background_size);
                serde_json::to_value(Attributed {
                    model: name.to_string(),
                    instance: Some(instance),
                    result: shap,
                })
            }
        }
        Category::GlobalAttribution => {
            let p: GlobalParams = params(q)?;
            let n_rows = p.n_rows.unwrap_or(session.settings.global_rows);
            if forecasting {
                let r = forecast::global_summary(session, p.model.as_deref(), n_rows, p.recent_lags.unwrap_or(10))?;
                method = format!("{method}:surrogate_tree");
                background_size = Some(session.settings.shap.background_size);
                serde_json::to_value(&r)
            } else {
                if p.recent_lags.is_some() {
                    return Err(invalid(q.category, "`recent_lags` applies to forecasting sessions"));
                }
                let (d, name, m) = session.tabular_model(p.model.as_deref())?;
                let g = global_shap(m.as_ref(), &d.audit_data()?, n_rows, &session.settings.shap)?;
                background_size = Some(session.settings.shap.background_size);
                serde_json::to_value(Attributed {
                    model: name.to_string(),
                    instance: None,
                    result: g,
                })
            }
        }
        Category::MinimalChange => {
            let p: CounterfactualParams = params(q)?;
            let (d, name, m) = session.tabular_model(p.model.as_deref())?;
            if p.instance >= d.data.n_rows() {
                return Err(invalid(q.category, format!("instance {} out of range", p.instance)));
            }
            let data = match &p.mutable {
                Some(names) => {
                    if let Some(unknown) = names.iter().find(|n| !m.info().features.contains(n)) {
                        return Err(Error::UnknownFeature(unknown.clone()));
                    }
                    d.data.with_mutability(names)
                }
                None => d.data.clone(),
            };
            let row = d.data.design(&m.info().features)?.swap_remove(p.instance);
            let cf = find_counterfactual(m.as_ref(), &data, &row, p.target_class, &session.settings.counterfactual)?;
            if !cf.found {
                warnings.push("no counterfactual reached the target class within the search budget".into());
            }
            serde_json::to_value(Attributed {
                model: name.to_string(),
                instance: Some(p.instance),
                result: cf,
            })
        }
    }
    .map_err(|e| Error::InvalidConfig(format!("unserializable result: {e}")))?;

    let inputs = json!({ "question": q, "spec": session.spec });
    Ok(ExplanationArtifact {
        kind: kind_of(q.category),
        inputs,
        values,
        metadata: ArtifactMetadata {
            seed,
            method,
            background_size,
            warnings,
        },
    })
}
