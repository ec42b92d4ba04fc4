use serde::{Deserialize, Serialize};

use super::{check_width, ModelInfo, Predictor, Provenance, Task};
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::stats::sigmoid;
use crate::tabular::{Dataset, FeatureKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-2,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// How one input column maps onto encoded columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// Standardized numeric column; missing values encode as 0 (the mean).
    Numeric { mean: f64, scale: f64 },
    /// One indicator per category; missing encodes as all zeros.
    OneHot { categories: usize },
}

impl ColumnEncoding {
    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Numeric { .. } => 1,
            ColumnEncoding::OneHot { categories } => *categories,
        }
    }
}

/// L2-regularised logistic regression over one-hot encoded categoricals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    info: ModelInfo,
    pub encoding: Vec<ColumnEncoding>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn info(&self) -> &ModelInfo {
        &self.info
    }

    pub fn rename(mut self, name: impl Into<String>) -> Self {
        self.info.name = name.into();
        self
    }

    pub fn encoded_width(&self) -> usize {
        self.encoding.iter().map(ColumnEncoding::width).sum()
    }

    /// Encoded representation `x` such that the score is `sigmoid(w·x + b)`.
    pub fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        encode(&self.encoding, row)
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        dot(&self.weights, &self.encode_row(row)) + self.intercept
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn encode(encoding: &[ColumnEncoding], row: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoding.iter().map(ColumnEncoding::width).sum());
    for (enc, &v) in encoding.iter().zip(row) {
        match *enc {
            ColumnEncoding::Numeric { mean, scale } => {
                out.push(if v.is_finite() { (v - mean) / scale } else { 0.0 });
            }
            ColumnEncoding::OneHot { categories } => {
                let start = out.len();
                out.resize(start + categories, 0.0);
                if v.is_finite() && v >= 0.0 && (v as usize) < categories {
                    out[start + v as usize] = 1.0;
                }
            }
        }
    }
    out
}

impl Predictor for LogisticModel {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_width(rows, self.encoding.len())?;
        Ok(rows.iter().map(|r| sigmoid(self.margin(r))).collect())
    }
}

/// Fit by Newton–Raphson on the penalised log-likelihood. The intercept is
/// not penalised. Features are all non-outcome columns unless `features`
/// is given.
pub fn train_logistic(
    data: &Dataset,
    outcome: &str,
    features: Option<&[String]>,
    config: &LogisticConfig,
) -> Result<LogisticModel> {
    let features: Vec<String> = match features {
        Some(f) => f.to_vec(),
        None => data.feature_names().into_iter().filter(|f| f != outcome).collect(),
    };
    let y = binary_outcome(data, outcome)?;
    let raw = data.design(&features)?;
    let mut encoding = Vec::with_capacity(features.len());
    for (j, name) in features.iter().enumerate() {
        let f = data.feature(name)?;
        if raw.iter().any(|r| !r[j].is_finite()) {
            return Err(Error::NonFiniteFeature(name.clone()));
        }
        encoding.push(match f.kind {
            FeatureKind::Numeric => {
                let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
                let mean = crate::stats::mean(&col);
                let sd = if col.len() > 1 { crate::stats::std_dev(&col) } else { 0.0 };
                ColumnEncoding::Numeric {
                    mean,
                    scale: if sd > 0.0 { sd } else { 1.0 },
                }
            }
            FeatureKind::Categorical | FeatureKind::Binary => ColumnEncoding::OneHot {
                categories: f.categories.len(),
            },
        });
    }
    let x: Vec<Vec<f64>> = raw.iter().map(|r| encode(&encoding, r)).collect();
    let p = x.first().map_or(0, Vec::len);
    // parameter vector: weights then intercept
    let mut theta = vec![0.0; p + 1];
    let ybar = crate::stats::mean(&y);
    theta[p] = crate::stats::logit(ybar);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..config.max_iter {
        iterations = it + 1;
        let mut grad = vec![0.0; p + 1];
        let mut hess = vec![vec![0.0; p + 1]; p + 1];
        for (row, &t) in x.iter().zip(&y) {
            let z = dot(&theta[..p], row) + theta[p];
            let mu = sigmoid(z);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let r = mu - t;
            for i in 0..p {
                if row[i] == 0.0 {
                    continue;
                }
                grad[i] += r * row[i];
                for k in 0..=i {
                    hess[i][k] += w * row[i] * row[k];
                }
                hess[p][i] += w * row[i];
            }
            grad[p] += r;
            hess[p][p] += w;
        }
        for i in 0..p {
            grad[i] += config.l2 * theta[i];
            hess[i][i] += config.l2;
        }
        for i in 0..=p {
            for k in 0..i {
                hess[k][i] = hess[i][k];
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= config.tol {
            converged = true;
            break;
        }
        let step = match cholesky_solve(&hess, &grad) {
            Some(s) => s,
            None => {
                for (i, row) in hess.iter_mut().enumerate() {
                    row[i] += 1e-6;
                }
                cholesky_solve(&hess, &grad).ok_or_else(|| {
                    Error::InvalidConfig("logistic Hessian is singular; increase l2".into())
                })?
            }
        };
        for (t, s) in theta.iter_mut().zip(&step) {
            *t -= s;
        }
    }
    let intercept = theta[p];
    theta.truncate(p);
    Ok(LogisticModel {
        info: ModelInfo::new("logistic", Task::BinaryClassification, Provenance::Builtin, features),
        encoding,
        weights: theta,
        intercept,
        converged,
        iterations,
    })
}

/// Outcome as 0/1 values, rejecting single-class and missing outcomes.
pub(crate) fn binary_outcome(data: &Dataset, outcome: &str) -> Result<Vec<f64>> {
    let f = data.feature(outcome)?;
    let y = data.column(outcome)?;
    let ok = match f.kind {
        FeatureKind::Binary => true,
        FeatureKind::Categorical => f.categories.len() == 2,
        FeatureKind::Numeric => y.iter().all(|v| *v == 0.0 || *v == 1.0),
    };
    if !ok || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("outcome `{outcome}` is not binary")));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::DegenerateOutcome(outcome.to_string()));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Cell, FeatureSchema};

    fn separable() -> Dataset {
        let schema = vec![FeatureSchema::numeric("x"), FeatureSchema::binary("y")];
        let rows = (0..200)
            .map(|i| {
                let x = -1.0 + 2.0 * (i as f64 + 0.5) / 200.0;
                vec![Cell::Num(x), Cell::Cat(u32::from(x > 0.0))]
            })
            .collect();
        Dataset::new(schema, rows, "y").unwrap()
    }

    #[test]
    fn separable_toy_is_learned() {
        let d = separable();
        let m = train_logistic(&d, "y", None, &LogisticConfig::default()).unwrap();
        let acc = super::super::accuracy(&m, &d).unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
    }

    #[test]
    fn degenerate_outcome() {
        let schema = vec![FeatureSchema::numeric("x"), FeatureSchema::binary("y")];
        let rows = (0..10).map(|i| vec![Cell::Num(i as f64), Cell::Cat(1)]).collect();
        let d = Dataset::new(schema, rows, "y").unwrap();
        assert_eq!(
            train_logistic(&d, "y", None, &LogisticConfig::default()).unwrap_err(),
            Error::DegenerateOutcome("y".into())
        );
    }

    #[test]
    fn missing_feature_rejected() {
        let schema = vec![FeatureSchema::numeric("x"), FeatureSchema::binary("y")];
        let rows = vec![
            vec![Cell::Num(0.0), Cell::Cat(0)],
            vec![Cell::Missing, Cell::Cat(1)],
        ];
        let d = Dataset::new(schema, rows, "y").unwrap();
        assert_eq!(
            train_logistic(&d, "y", None, &LogisticConfig::default()).unwrap_err(),
            Error::NonFiniteFeature("x".into())
        );
    }

    #[test]
    fn prediction_is_sigmoid_of_linear_form() {
        let schema = vec![
            FeatureSchema::numeric("x"),
            FeatureSchema::categorical("c", ["a", "b", "c"]),
            FeatureSchema::binary("y"),
        ];
        let rows = (0..60)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 3.0;
                let c = (i % 3) as u32;
                let y = u32::from(x + c as f64 * 0.8 > 0.9);
                vec![Cell::Num(x), Cell::Cat(c), Cell::Cat(y)]
            })
            .collect();
        let d = Dataset::new(schema, rows, "y").unwrap();
        let m = train_logistic(&d, "y", None, &LogisticConfig::default()).unwrap();
        assert_eq!(m.weights.len(), m.encoded_width());
        assert_eq!(m.encoded_width(), 4);
        let design = d.design(&m.info().features).unwrap();
        let p = m.predict(&design).unwrap();
        for (row, got) in design.iter().zip(p) {
            let x = m.encode_row(row);
            let z: f64 = m.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + m.intercept;
            let want = 1.0 / (1.0 + (-z).exp());
            assert!((got - want).abs() < 1e-12);
        }
    }
}
