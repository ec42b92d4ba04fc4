//! Post-hoc explainers: partial dependence, Shapley attributions (exact,
//! sampled and tree-based), counterfactual search and forecast surrogates.

mod counterfactual;
mod pdp;
mod shap;
mod surrogate;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::Predictor;
use crate::tabular::Dataset;

pub use counterfactual::{find_counterfactual, CounterfactualConfig, CounterfactualResult};
pub use pdp::{compute_pdp, compute_pdp_on_grid, PdpCurve};
pub use shap::{explain_shap, shapley_exact, shapley_sampled, tree_shap, ShapConfig};
pub use surrogate::{fit_ts_surrogate, lag_names, Fidelity, SurrogateConfig, TsSurrogate};

pub const DEFAULT_BACKGROUND: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMethod {
    Exact,
    /// Permutation sampling, used when exact enumeration is too large.
    Sampled,
    Tree,
    Surrogate,
}

/// What the attributions add up to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapScale {
    /// The model's own output.
    Output,
    /// The pre-link additive score of a logistic tree ensemble.
    Margin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub features: Vec<String>,
    /// Mean model output over the background.
    pub phi0: f64,
    pub phis: Vec<f64>,
    /// Model output at the explained row, on `scale`.
    pub fx: f64,
    pub method: ShapMethod,
    pub scale: ShapScale,
    /// Absent features take their values from background rows
    /// (interventional convention).
    pub coalition_convention: String,
    pub background_size: usize,
    /// `fx − phi0 − Σ phis`; zero up to rounding for exact and tree methods.
    pub efficiency_gap: f64,
}

impl ShapResult {
    pub(crate) fn new(
        features: Vec<String>,
        phi0: f64,
        phis: Vec<f64>,
        fx: f64,
        method: ShapMethod,
        scale: ShapScale,
        background_size: usize,
    ) -> Self {
        let efficiency_gap = fx - phi0 - phis.iter().sum::<f64>();
        ShapResult {
            features,
            phi0,
            phis,
            fx,
            method,
            scale,
            coalition_convention: "interventional: absent features drawn from background rows".into(),
            background_size,
            efficiency_gap,
        }
    }

    /// Features ordered by decreasing |φ|.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.features.iter().map(String::as_str).zip(self.phis.iter().copied()).collect();
        v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(b.0)));
        v
    }
}

/// Mean |φ| per feature over several local explanations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalShap {
    pub features: Vec<String>,
    pub mean_abs: Vec<f64>,
    pub n_rows: usize,
}

impl GlobalShap {
    pub fn from_local(results: &[ShapResult]) -> Option<GlobalShap> {
        let first = results.first()?;
        let mut mean_abs = vec![0.0; first.phis.len()];
        for r in results {
            for (m, p) in mean_abs.iter_mut().zip(&r.phis) {
                *m += p.abs();
            }
        }
        for m in &mut mean_abs {
            *m /= results.len() as f64;
        }
        Some(GlobalShap {
            features: first.features.clone(),
            mean_abs,
            n_rows: results.len(),
        })
    }

    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.features.iter().map(String::as_str).zip(self.mean_abs.iter().copied()).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

/// Up to `n` rows drawn without replacement (seeded), encoded for `model`.
pub fn background_rows(model: &dyn Predictor, data: &Dataset, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let all = data.design(&model.info().features)?;
    if all.len() <= n {
        return Ok(all);
    }
    let mut rng = crate::seeded_rng(seed);
    let mut idx = sample(&mut rng, all.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| all[i].clone()).collect())
}

/// Global attribution: mean |φ| over up to `n_rows` seeded rows of `data`.
pub fn global_shap(
    model: &dyn Predictor,
    data: &Dataset,
    n_rows: usize,
    config: &ShapConfig,
) -> Result<GlobalShap> {
    let background = background_rows(model, data, config.background_size, config.seed)?;
    let rows = background_rows(model, data, n_rows, config.seed.wrapping_add(1))?;
    let local = rows
        .iter()
        .map(|r| explain_shap(model, r, &background, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(GlobalShap::from_local(&local).unwrap_or(GlobalShap {
        features: model.info().features.clone(),
        mean_abs: vec![0.0; model.info().features.len()],
        n_rows: 0,
    }))
}
