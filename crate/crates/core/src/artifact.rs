//! The serialized unit every explainer run produces. CLI files, service
//! responses and session history all hold this exact JSON.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Rating,
    Pdp,
    Shap,
    GlobalShap,
    Counterfactual,
    WhatIf,
    Hypothesis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub seed: u64,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationArtifact {
    pub kind: ArtifactKind,
    pub inputs: Value,
    pub values: Value,
    pub metadata: ArtifactMetadata,
}

impl ExplanationArtifact {
    pub fn new(kind: ArtifactKind, inputs: Value, values: impl Serialize, metadata: ArtifactMetadata) -> Result<Self> {
        Ok(ExplanationArtifact {
            kind,
            inputs,
            values: to_value(values)?,
            metadata,
        })
    }

    /// Canonical pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    /// `values` decoded as a concrete result type.
    pub fn values_as<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.values.clone()).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

pub(crate) fn to_value(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidConfig(format!("unserializable value: {e}")))
}
