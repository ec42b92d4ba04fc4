use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// The kinds of stakeholder question the engine can answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    GroupDisparity,
    CausalInfluence,
    ConfoundingDistortion,
    GlobalFeatureEffect,
    LocalAttribution,
    GlobalAttribution,
    MinimalChange,
    GroupPerturbationSensitivity,
    InputSensitivity,
    BaselineResemblance,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::GroupDisparity,
        Category::CausalInfluence,
        Category::ConfoundingDistortion,
        Category::GlobalFeatureEffect,
        Category::LocalAttribution,
        Category::GlobalAttribution,
        Category::MinimalChange,
        Category::GroupPerturbationSensitivity,
        Category::InputSensitivity,
        Category::BaselineResemblance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::GroupDisparity => "group_disparity",
            Category::CausalInfluence => "causal_influence",
            Category::ConfoundingDistortion => "confounding_distortion",
            Category::GlobalFeatureEffect => "global_feature_effect",
            Category::LocalAttribution => "local_attribution",
            Category::GlobalAttribution => "global_attribution",
            Category::MinimalChange => "minimal_change",
            Category::GroupPerturbationSensitivity => "group_perturbation_sensitivity",
            Category::InputSensitivity => "input_sensitivity",
            Category::BaselineResemblance => "baseline_resemblance",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub category: Category,
    #[serde(default = "empty_object")]
    pub params: Value,
    /// The stakeholder's wording, kept for the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl Question {
    pub fn new(category: Category, params: Value) -> Self {
        Question {
            category,
            params,
            text: None,
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    /// Parse a question whose category arrives as a free string, so an
    /// unknown name surfaces as `UnknownCategory` rather than a serde error.
    pub fn from_json(v: &Value) -> Result<Question> {
        let category = v
            .get("category")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidConfig("question needs a `category` string".into()))?;
        let category: Category = category.parse()?;
        let params = v.get("params").cloned().unwrap_or_else(empty_object);
        let text = v.get("text").and_then(Value::as_str).map(str::to_string);
        Ok(Question { category, params, text })
    }

    pub(crate) fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        let params = if self.params.is_null() { empty_object() } else { self.params.clone() };
        serde_json::from_value(params).map_err(|e| Error::InvalidParams {
            category: self.category.to_string(),
            message: e.to_string(),
        })
    }
}

/// Engine calls answering a category, plus the suggested follow-up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub category: Category,
    pub methods: Vec<String>,
    /// Which method to run next and why.
    pub hint: String,
    /// The category that follow-up belongs to.
    pub follow_up: Vec<Category>,
}

/// Pure and total over [`Category`].
pub fn route_question(category: Category) -> Plan {
    use Category::*;
    let (methods, hint, follow_up): (&[&str], &str, &[Category]) = match category {
        GroupDisparity => (
            &["compute_wrs"],
            "If groups differ, follow up with DIE % to tell confounding apart from a direct effect of the protected attribute.",
            &[ConfoundingDistortion],
        ),
        CausalInfluence => (
            &["compute_ate"],
            "Check the estimate with DIE %: a large gap between adjusted and unadjusted effects means confounders are inflating it.",
            &[ConfoundingDistortion],
        ),
        ConfoundingDistortion => (
            &["compute_die"],
            "Look at instance-level SHAP values to see which inputs carry the distortion.",
            &[LocalAttribution],
        ),
        GlobalFeatureEffect => (
            &["compute_pdp"],
            "A PDP mixes in correlated features; when confounding is plausible, estimate the ATE of the feature as well.",
            &[CausalInfluence],
        ),
        LocalAttribution => (
            &["shapley_local"],
            "One instance can mislead: compare with global SHAP, or with the ATE when the question is causal.",
            &[GlobalAttribution, CausalInfluence],
        ),
        GlobalAttribution => (
            &["shapley_global_summary"],
            "Importance alone says nothing about fairness or robustness; rate the model (RDE) across subgroups or perturbations.",
            &[BaselineResemblance, GroupPerturbationSensitivity],
        ),
        MinimalChange => (
            &["find_counterfactual"],
            "Before acting on the suggested change, confirm it is plausible with SHAP or a PDP of the changed feature.",
            &[LocalAttribution, GlobalFeatureEffect],
        ),
        GroupPerturbationSensitivity => (
            &["compute_die"],
            "To see how each input's contribution shifts between groups under the perturbation, compare SHAP values per group.",
            &[LocalAttribution],
        ),
        InputSensitivity => (
            &["compute_ate"],
            "The average hides spread across instances; use SHAP to see which instances react most.",
            &[LocalAttribution],
        ),
        BaselineResemblance => (
            &["compute_rating", "random_baseline", "biased_baseline"],
            "For edge cases near a baseline, inspect individual instances with counterfactuals or SHAP.",
            &[MinimalChange, LocalAttribution],
        ),
    };
    Plan {
        category,
        methods: methods.iter().map(|m| m.to_string()).collect(),
        hint: hint.to_string(),
        follow_up: follow_up.to_vec(),
    }
}
