use serde::{Deserialize, Serialize};

use super::{Forecaster, ModelInfo, Provenance, Task};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecasterConfig {
    pub order: usize,
}

impl Default for ForecasterConfig {
    fn default() -> Self {
        ForecasterConfig { order: 5 }
    }
}

const JITTER: f64 = 1e-6;

/// Order-p linear autoregression with intercept:
/// `y_t = c + Σ_k a_k · y_{t-k}`. Multi-step forecasts apply the one-step
/// rule recursively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArForecaster {
    info: ModelInfo,
    /// `coefficients[k]` multiplies `y_{t-1-k}`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// The design was singular and a ridge jitter was applied.
    pub jittered: bool,
}

impl ArForecaster {
    pub fn info(&self) -> &ModelInfo {
        &self.info
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn rename(mut self, name: impl Into<String>) -> Self {
        self.info.name = name.into();
        self
    }

    pub fn one_step(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(k, a)| a * history[n - 1 - k])
                .sum::<f64>()
    }
}

impl Forecaster for ArForecaster {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn forecast(&self, _group: &str, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let p = self.order();
        if history.len() < p {
            return Err(Error::SeriesTooShort {
                needed: p,
                got: history.len(),
            });
        }
        if history.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature("forecast history".into()));
        }
        let mut buf: Vec<f64> = history[history.len() - p..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.one_step(&buf);
            out.push(next);
            buf.remove(0);
            buf.push(next);
        }
        Ok(out)
    }
}

pub fn train_forecaster(series: &[f64], config: &ForecasterConfig) -> Result<ArForecaster> {
    train_forecaster_pooled(&[series], config)
}

/// Fit one autoregression on the lag windows of several series.
pub fn train_forecaster_pooled(series: &[&[f64]], config: &ForecasterConfig) -> Result<ArForecaster> {
    let p = config.order;
    if p == 0 {
        return Err(Error::InvalidConfig("autoregressive order must be at least 1".into()));
    }
    let mut lags = Vec::new();
    let mut targets = Vec::new();
    for s in series {
        if s.len() <= p + 1 {
            return Err(Error::SeriesTooShort {
                needed: p + 2,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature("training series".into()));
        }
        for t in p..s.len() {
            lags.push((1..=p).map(|k| s[t - k]).collect::<Vec<f64>>());
            targets.push(s[t]);
        }
    }
    // centre so the intercept drops out of the normal equations
    let n = targets.len() as f64;
    let lag_means: Vec<f64> = (0..p).map(|k| lags.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let y_mean = targets.iter().sum::<f64>() / n;
    let centred: Vec<Vec<f64>> = lags
        .iter()
        .map(|r| r.iter().zip(&lag_means).map(|(v, m)| v - m).collect())
        .collect();
    let yc: Vec<f64> = targets.iter().map(|v| v - y_mean).collect();
    let (coefficients, jittered) =
        least_squares(&centred, &yc, 0.0, JITTER).ok_or_else(|| Error::InvalidConfig("autoregression is singular".into()))?;
    let intercept = y_mean - coefficients.iter().zip(&lag_means).map(|(a, m)| a * m).sum::<f64>();
    let features = (1..=p).map(|k| format!("lag_{k}")).collect();
    Ok(ArForecaster {
        info: ModelInfo::new(format!("ar{p}"), Task::Forecasting, Provenance::Builtin, features),
        coefficients,
        intercept,
        jittered,
    })
}
