use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, nnls_small};
use crate::models::{fit_arrays, ModelInfo, Predictor, Provenance, Task, TreeConfig, TreeEnsembleModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    Ridge { lambda: f64 },
    Trees(TreeConfig),
    Knn { k: usize },
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::Ridge { .. } => "ridge",
            Component::Trees(_) => "trees",
            Component::Knn { .. } => "knn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperLearnerConfig {
    pub components: Vec<Component>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SuperLearnerConfig {
    fn default() -> Self {
        SuperLearnerConfig {
            components: vec![
                Component::Ridge { lambda: 1e-3 },
                Component::Trees(TreeConfig {
                    n_trees: 100,
                    max_depth: 3,
                    ..TreeConfig::default()
                }),
                Component::Knn { k: 5 },
            ],
            folds: 5,
            seed: 0,
        }
    }
}

/// Standardises numeric columns and one-hot encodes categorical ones.
/// Missing values encode as zero.
#[derive(Clone, Debug)]
struct Encoder {
    columns: Vec<ColumnCode>,
}

#[derive(Clone, Debug)]
enum ColumnCode {
    Numeric { mean: f64, scale: f64 },
    OneHot { width: usize },
}

impl Encoder {
    fn fit(x: &[Vec<f64>], categorical: &[bool]) -> Self {
        let columns = categorical
            .iter()
            .enumerate()
            .map(|(j, &cat)| {
                let col: Vec<f64> = x.iter().map(|r| r[j]).filter(|v| v.is_finite()).collect();
                if cat {
                    let max = col.iter().copied().fold(0.0, f64::max);
                    ColumnCode::OneHot { width: max as usize + 1 }
                } else {
                    let mean = if col.is_empty() { 0.0 } else { crate::stats::mean(&col) };
                    let sd = if col.len() > 1 { crate::stats::std_dev(&col) } else { 0.0 };
                    ColumnCode::Numeric {
                        mean,
                        scale: if sd > 0.0 { sd } else { 1.0 },
                    }
                }
            })
            .collect();
        Encoder { columns }
    }

    fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for (code, &v) in self.columns.iter().zip(row) {
            match *code {
                ColumnCode::Numeric { mean, scale } => out.push(if v.is_finite() { (v - mean) / scale } else { 0.0 }),
                ColumnCode::OneHot { width } => {
                    let start = out.len();
                    out.resize(start + width, 0.0);
                    if v.is_finite() && v >= 0.0 && (v as usize) < width {
                        out[start + v as usize] = 1.0;
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Fitted {
    Ridge {
        encoder: Encoder,
        weights: Vec<f64>,
        intercept: f64,
    },
    Trees(TreeEnsembleModel),
    Knn {
        encoder: Encoder,
        points: Vec<Vec<f64>>,
        targets: Vec<f64>,
        k: usize,
    },
}

impl Fitted {
    fn fit(component: &Component, x: &[Vec<f64>], y: &[f64], categorical: &[bool]) -> Result<Fitted> {
        Ok(match component {
            Component::Ridge { lambda } => {
                let encoder = Encoder::fit(x, categorical);
                let z: Vec<Vec<f64>> = x.iter().map(|r| encoder.encode(r)).collect();
                let p = z.first().map_or(0, Vec::len);
                let n = z.len() as f64;
                let means: Vec<f64> = (0..p).map(|j| z.iter().map(|r| r[j]).sum::<f64>() / n).collect();
                let ym = y.iter().sum::<f64>() / n;
                let zc: Vec<Vec<f64>> = z
                    .iter()
                    .map(|r| r.iter().zip(&means).map(|(a, m)| a - m).collect())
                    .collect();
                let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
                let (weights, _) = least_squares(&zc, &yc, *lambda, 1e-6)
                    .ok_or_else(|| Error::EnsembleFitFailure("ridge system is singular".into()))?;
                let intercept = ym - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
                Fitted::Ridge {
                    encoder,
                    weights,
                    intercept,
                }
            }
            Component::Trees(cfg) => {
                let info = ModelInfo::new(
                    "outcome_trees",
                    Task::Regression,
                    Provenance::Builtin,
                    (0..categorical.len()).map(|j| format!("x{j}")).collect(),
                );
                Fitted::Trees(fit_arrays(info, x, y, categorical, false, cfg)?)
            }
            Component::Knn { k } => {
                if *k == 0 {
                    return Err(Error::InvalidConfig("k must be at least 1".into()));
                }
                let encoder = Encoder::fit(x, categorical);
                Fitted::Knn {
                    points: x.iter().map(|r| encoder.encode(r)).collect(),
                    encoder,
                    targets: y.to_vec(),
                    k: *k,
                }
            }
        })
    }

    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(match self {
            Fitted::Ridge {
                encoder,
                weights,
                intercept,
            } => x
                .iter()
                .map(|r| intercept + encoder.encode(r).iter().zip(weights).map(|(a, w)| a * w).sum::<f64>())
                .collect(),
            Fitted::Trees(m) => m.predict(x)?,
            Fitted::Knn {
                encoder,
                points,
                targets,
                k,
            } => {
                let k = (*k).min(points.len());
                let mut dist: Vec<(f64, usize)> = Vec::with_capacity(points.len());
                x.iter()
                    .map(|r| {
                        let q = encoder.encode(r);
                        dist.clear();
                        dist.extend(points.iter().enumerate().map(|(i, p)| {
                            (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
                        }));
                        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                        dist.select_nth_unstable_by(k - 1, cmp);
                        dist[..k].iter().map(|&(_, i)| targets[i]).sum::<f64>() / k as f64
                    })
                    .collect()
            }
        })
    }
}

/// Stacked regressor: a convex combination of the fitted components.
#[derive(Clone, Debug)]
pub struct SuperLearner {
    names: Vec<&'static str>,
    /// `None` for components that received zero weight.
    fitted: Vec<Option<Fitted>>,
    weights: Vec<f64>,
}

impl SuperLearner {
    pub fn weights(&self) -> Vec<(&'static str, f64)> {
        self.names.iter().copied().zip(self.weights.iter().copied()).collect()
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        for (f, &w) in self.fitted.iter().zip(&self.weights) {
            let Some(f) = f else { continue };
            for (o, p) in out.iter_mut().zip(f.predict(x)?) {
                *o += w * p;
            }
        }
        Ok(out)
    }
}

/// Fit every component on K folds, learn non-negative stacking weights
/// (normalised to sum to one) on the out-of-fold predictions, then refit
/// the components on all rows.
pub fn fit_super_learner(
    x: &[Vec<f64>],
    y: &[f64],
    categorical: &[bool],
    config: &SuperLearnerConfig,
) -> Result<SuperLearner> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch { expected: n, found: y.len() });
    }
    if config.folds < 2 || config.components.is_empty() {
        return Err(Error::InvalidConfig("super learner needs >= 2 folds and a component".into()));
    }
    if n < 2 * config.folds {
        return Err(Error::TooFewRows {
            needed: 2 * config.folds,
            got: n,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature("outcome".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::seeded_rng(config.seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % config.folds;
    }

    let k = config.components.len();
    let mut oof = vec![vec![0.0; k]; n];
    let mut usable = vec![true; k];
    for fold in 0..config.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
        for (c, comp) in config.components.iter().enumerate() {
            if !usable[c] {
                continue;
            }
            let preds = Fitted::fit(comp, &xt, &yt, categorical).and_then(|f| f.predict(&xv));
            match preds {
                Ok(p) if p.iter().all(|v| v.is_finite()) => {
                    for (&i, v) in test.iter().zip(p) {
                        oof[i][c] = v;
                    }
                }
                _ => usable[c] = false,
            }
        }
    }
    if !usable.iter().any(|u| *u) {
        return Err(Error::EnsembleFitFailure("every component failed".into()));
    }

    let cols: Vec<usize> = (0..k).filter(|&c| usable[c]).collect();
    let design: Vec<Vec<f64>> = oof.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
    let raw = nnls_small(&design, y);
    let total: f64 = raw.iter().sum();
    let mut weights = vec![0.0; k];
    for (&c, w) in cols.iter().zip(&raw) {
        weights[c] = if total > 0.0 { w / total } else { 1.0 / cols.len() as f64 };
    }

    let fitted = config
        .components
        .iter()
        .zip(&weights)
        .map(|(comp, &w)| (w > 0.0).then(|| Fitted::fit(comp, x, y, categorical)).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(SuperLearner {
        names: config.components.iter().map(Component::name).collect(),
        fitted,
        weights,
    })
}
