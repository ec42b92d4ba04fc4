use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit_arrays, Forecaster, ModelInfo, Provenance, Task, TreeConfig, TreeEnsembleModel};
use crate::timeseries::{forecast_metrics_scaled, impute, ForecastMetrics, Imputation, WindowSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub trees: TreeConfig,
    /// Every `eval_every`-th window is held out for the fidelity report.
    pub eval_every: usize,
    pub min_windows: usize,
    pub imputation: Imputation,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            trees: TreeConfig {
                n_trees: 300,
                max_depth: 4,
                learning_rate: 0.1,
                min_leaf: 3,
                ..TreeConfig::default()
            },
            eval_every: 10,
            min_windows: 20,
            imputation: Imputation::ZeroFill,
        }
    }
}

/// Held-out accuracy of the surrogate and its base, both against the true
/// next value, plus the surrogate's agreement with the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub n_eval: usize,
    pub surrogate: ForecastMetrics,
    pub base: ForecastMetrics,
    pub agreement: ForecastMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsSurrogate {
    pub model: TreeEnsembleModel,
    pub history_len: usize,
    pub imputation: Imputation,
    pub fidelity: Fidelity,
}

impl TsSurrogate {
    /// Encoded feature row for a history window.
    pub fn encode(&self, history: &[f64]) -> Result<Vec<f64>> {
        if history.len() != self.history_len {
            return Err(Error::FeatureCount {
                expected: self.history_len,
                found: history.len(),
            });
        }
        Ok(impute(history, self.imputation))
    }
}

/// `lag_H … lag_1`, oldest first, matching window input order.
pub fn lag_names(history_len: usize) -> Vec<String> {
    (1..=history_len).rev().map(|k| format!("lag_{k}")).collect()
}

/// Tree ensemble trained to reproduce the base forecaster's first step
/// ahead from the raw lags.
pub fn fit_ts_surrogate(base: &dyn Forecaster, windows: &[WindowSet], config: &SurrogateConfig) -> Result<TsSurrogate> {
    let total: usize = windows.iter().map(|w| w.windows.len()).sum();
    if total < config.min_windows.max(2) {
        return Err(Error::InsufficientWindows {
            needed: config.min_windows.max(2),
            got: total,
        });
    }
    if config.eval_every < 2 {
        return Err(Error::InvalidConfig("eval_every must be at least 2".into()));
    }
    let history_len = windows[0].history_len;
    if windows.iter().any(|w| w.history_len != history_len) {
        return Err(Error::InvalidConfig("window sets differ in history length".into()));
    }

    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut eval = Vec::new();
    let mut k = 0;
    for set in windows {
        for w in &set.windows {
            let x = impute(&w.input, config.imputation);
            let y = base.forecast(&set.company, &x, 1)?[0];
            if k % config.eval_every == config.eval_every - 1 {
                eval.push((x, y, w.target[0]));
            } else {
                train_x.push(x);
                train_y.push(y);
            }
            k += 1;
        }
    }
    let info = ModelInfo::new("ts_surrogate", Task::Regression, Provenance::Builtin, lag_names(history_len));
    let model = fit_arrays(info, &train_x, &train_y, &vec![false; history_len], false, &config.trees)?;

    let scale = {
        let steps: Vec<f64> = eval
            .iter()
            .flat_map(|(x, _, _)| x.windows(2).map(|p| (p[1] - p[0]).abs()))
            .collect();
        let s = crate::stats::mean(&steps);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let surrogate_pred: Vec<f64> = eval.iter().map(|(x, _, _)| model.margin(x)).collect();
    let base_pred: Vec<f64> = eval.iter().map(|e| e.1).collect();
    let truth: Vec<f64> = eval.iter().map(|e| e.2).collect();
    let fidelity = Fidelity {
        n_eval: eval.len(),
        surrogate: forecast_metrics_scaled(&surrogate_pred, &truth, scale)?,
        base: forecast_metrics_scaled(&base_pred, &truth, scale)?,
        agreement: forecast_metrics_scaled(&surrogate_pred, &base_pred, scale)?,
    };
    Ok(TsSurrogate {
        model,
        history_len,
        imputation: config.imputation,
        fidelity,
    })
}
