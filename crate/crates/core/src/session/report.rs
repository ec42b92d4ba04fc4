use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::answer::Attributed;
use super::forecast::{SurrogateShap, SurrogateSummary};
use super::hypothesis::HypothesisOutcome;
use super::question::Category;
use super::rde::{Accuracy, RdeResult};
use super::{Request, Role, Session};
use crate::artifact::{ArtifactKind, ExplanationArtifact};
use crate::error::{Error, Result};
use crate::explain::{CounterfactualResult, GlobalShap, PdpCurve, ShapResult};
use crate::tabular::CausalSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    /// 1-based position in the session history.
    pub index: usize,
    pub request: Request,
    pub methods: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub follow_up: Vec<Category>,
    pub summary: String,
    pub artifact: ExplanationArtifact,
}

/// Ordered account of a session: what was asked, how it was answered,
/// and what to look at next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub session: String,
    pub role: Role,
    pub spec: CausalSpec,
    pub spec_is_default: bool,
    pub sections: Vec<ReportSection>,
}

pub(super) fn render(session: &Session) -> Result<Report> {
    if session.history.is_empty() {
        return Err(Error::EmptySession);
    }
    let sections = session
        .history
        .iter()
        .enumerate()
        .map(|(i, e)| ReportSection {
            index: i + 1,
            request: e.request.clone(),
            methods: match &e.plan {
                Some(p) => p.methods.clone(),
                None => vec![e.artifact.metadata.method.clone()],
            },
            hint: e.plan.as_ref().map(|p| p.hint.clone()),
            follow_up: e.plan.as_ref().map(|p| p.follow_up.clone()).unwrap_or_default(),
            summary: summarize(&e.artifact),
            artifact: e.artifact.clone(),
        })
        .collect();
    Ok(Report {
        session: session.id.clone(),
        role: session.role,
        spec: session.spec.clone(),
        spec_is_default: session.spec_is_default,
        sections,
    })
}

fn top(features: &[String], values: &[f64], n: usize) -> String {
    let mut v: Vec<(&String, f64)> = features.iter().zip(values.iter().copied()).collect();
    v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(b.0)));
    v.iter()
        .take(n)
        .map(|(f, x)| format!("{f} {x:+.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn verdict_label(v: &crate::rating::Verdict) -> String {
    serde_json::to_value(v.resemblance)
        .ok()
        .and_then(|s| s.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// One line per artifact, derived only from its stored values.
pub fn summarize(a: &ExplanationArtifact) -> String {
    let v = &a.values;
    let decoded = match a.kind {
        ArtifactKind::Rating | ArtifactKind::WhatIf => serde_json::from_value::<RdeResult>(v.clone()).ok().map(|r| {
            let mut parts: Vec<String> = r
                .rating
                .scores
                .iter()
                .map(|(name, s)| match r.rating.verdicts.get(name) {
                    Some(verdict) => format!("{name} {s:.4} ({})", verdict_label(verdict)),
                    None => format!("{name} {s:.4}"),
                })
                .collect();
            for (name, acc) in &r.accuracy {
                parts.push(match acc {
                    Accuracy::Classification { accuracy } => format!("{name} accuracy {accuracy:.4}"),
                    Accuracy::Forecast(m) => format!("{name} SMAPE {:.2}% MASE {:.3}", m.smape, m.mase),
                });
            }
            format!("{}: {}", r.rating.metric.as_str(), parts.join("; "))
        }),
        ArtifactKind::Pdp => serde_json::from_value::<Attributed<PdpCurve>>(v.clone()).ok().map(|p| {
            let lo = p.result.averages.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = p.result.averages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!(
                "partial dependence of {} on `{}` ranges over [{lo:.4}, {hi:.4}] across {} grid points",
                p.model,
                p.result.feature,
                p.result.grid.len()
            )
        }),
        ArtifactKind::Shap => serde_json::from_value::<Attributed<ShapResult>>(v.clone())
            .ok()
            .map(|s| {
                format!(
                    "{} on row {}: f(x) {:.4}, base {:.4}; strongest: {}",
                    s.model,
                    s.instance.unwrap_or_default(),
                    s.result.fx,
                    s.result.phi0,
                    top(&s.result.features, &s.result.phis, 3)
                )
            })
            .or_else(|| {
                serde_json::from_value::<SurrogateShap>(v.clone()).ok().map(|s| {
                    format!(
                        "{} forecast {:.2} for {} (window {}); strongest lags: {}",
                        s.model,
                        s.forecast,
                        s.company,
                        s.window,
                        top(&s.shap.features, &s.shap.phis, 3)
                    )
                })
            }),
        ArtifactKind::GlobalShap => serde_json::from_value::<Attributed<GlobalShap>>(v.clone())
            .ok()
            .map(|g| format!("{} mean |phi|: {}", g.model, top(&g.result.features, &g.result.mean_abs, 5)))
            .or_else(|| {
                serde_json::from_value::<SurrogateSummary>(v.clone()).ok().map(|s| {
                    format!(
                        "{} mean |phi|: {}; latest {} lags carry {:.1}% of attribution",
                        s.model,
                        top(&s.global.features, &s.global.mean_abs, 5),
                        s.lags.recent_lags,
                        100.0 * s.lags.recent_share
                    )
                })
            }),
        ArtifactKind::Counterfactual => serde_json::from_value::<Attributed<CounterfactualResult>>(v.clone())
            .ok()
            .map(|c| {
                let r = &c.result;
                if !r.found {
                    return format!("no counterfactual found for row {}", c.instance.unwrap_or_default());
                }
                let changes: Vec<String> = r
                    .features
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| r.changed_features.contains(f))
                    .map(|(j, f)| format!("{f}: {} -> {}", fmt_num(r.x_orig[j]), fmt_num(r.x_cf[j])))
                    .collect();
                format!(
                    "row {} reaches class {} (score {:.4}) by changing {}",
                    c.instance.unwrap_or_default(),
                    r.target,
                    r.score,
                    changes.join(", ")
                )
            }),
        ArtifactKind::Hypothesis => serde_json::from_value::<HypothesisOutcome>(v.clone())
            .ok()
            .map(|h| h.conclusion),
    };
    decoded.unwrap_or_else(|| format!("{:?} artifact", a.kind))
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let role = serde_json::to_value(self.role).ok();
        let role = role.as_ref().and_then(|r| r.as_str()).unwrap_or_default();
        let _ = writeln!(out, "Session {} ({role})", self.session);
        let _ = writeln!(
            out,
            "Causal spec: treatment `{}`, outcome `{}`, protected [{}]{}",
            self.spec.treatment,
            self.spec.outcome,
            self.spec.protected.join(", "),
            if self.spec_is_default { " (default)" } else { "" }
        );
        for s in &self.sections {
            let _ = writeln!(out);
            let title = match &s.request {
                Request::Question(q) => match &q.text {
                    Some(t) => format!("{}: {t}", q.category),
                    None => q.category.to_string(),
                },
                Request::Hypothesis(h) => format!("hypothesis on {}", h.model.as_deref().unwrap_or("default model")),
            };
            let _ = writeln!(out, "{}. {title}", s.index);
            let _ = writeln!(out, "   Methods: {}", s.methods.join(", "));
            let _ = writeln!(out, "   Result: {}", s.summary);
            for w in &s.artifact.metadata.warnings {
                let _ = writeln!(out, "   Warning: {w}");
            }
            if let Some(h) = &s.hint {
                let _ = writeln!(out, "   Next: {h}");
            }
        }
        out
    }
}
