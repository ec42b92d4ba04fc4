//! Gradient-boosted (or bagged) binary decision trees.
//!
//! Numeric splits send `x < threshold` left; categorical splits send
//! `x == category` left. Missing values (`NaN`) always go right.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, ModelInfo, Predictor, Provenance, Task};
use crate::error::{Error, Result};
use crate::stats::{logit, sigmoid};
use crate::tabular::{Dataset, FeatureKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum SplitRule {
    LessThan(f64),
    Equals(f64),
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, v: f64) -> bool {
        match *self {
            SplitRule::LessThan(t) => v < t,
            SplitRule::Equals(c) => v == c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flat node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => i = if rule.goes_left(row[*feature]) { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    Logistic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnsembleMode {
    #[default]
    Boosting,
    /// Bootstrap rows and subsample `sqrt(F)` candidate features per split;
    /// trees are averaged.
    Bagging,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// L2 penalty on leaf values.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub mode: EnsembleMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf: 5,
            lambda: 1.0,
            mode: EnsembleMode::Boosting,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    info: ModelInfo,
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub link: Link,
    pub max_depth: usize,
    pub max_leaves: usize,
    /// Training loss after each round.
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

impl TreeEnsembleModel {
    pub fn from_parts(info: ModelInfo, trees: Vec<Tree>, learning_rate: f64, base_score: f64, link: Link) -> Self {
        let max_depth = trees.iter().map(Tree::depth).max().unwrap_or(0);
        let max_leaves = trees.iter().map(Tree::n_leaves).max().unwrap_or(1);
        TreeEnsembleModel {
            info,
            trees,
            learning_rate,
            base_score,
            link,
            max_depth,
            max_leaves,
            loss_history: Vec::new(),
        }
    }

    pub fn info(&self) -> &ModelInfo {
        &self.info
    }

    pub fn rename(mut self, name: impl Into<String>) -> Self {
        self.info.name = name.into();
        self
    }

    /// Additive score before the link: `base + lr · Σ leaf`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.leaf_value(row)).sum::<f64>()
    }

    pub fn apply_link(&self, margin: f64) -> f64 {
        match self.link {
            Link::Identity => margin,
            Link::Logistic => sigmoid(margin),
        }
    }

    /// A copy whose output is the margin (identity link). Additive
    /// explanations are computed on this scale.
    pub fn margin_model(&self) -> TreeEnsembleModel {
        let mut m = self.clone();
        m.link = Link::Identity;
        m.info.task = Task::Regression;
        m
    }
}

impl Predictor for TreeEnsembleModel {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_width(rows, self.info.features.len())?;
        Ok(rows.iter().map(|r| self.apply_link(self.margin(r))).collect())
    }

    fn as_tree_ensemble(&self) -> Option<&TreeEnsembleModel> {
        Some(self)
    }
}

/// Train on a dataset. Binary outcomes use log-loss with a logistic link,
/// numeric outcomes squared error. Features default to all non-outcome
/// columns.
pub fn train_tree_ensemble(
    data: &Dataset,
    outcome: &str,
    features: Option<&[String]>,
    config: &TreeConfig,
) -> Result<TreeEnsembleModel> {
    let features: Vec<String> = match features {
        Some(f) => f.to_vec(),
        None => data.feature_names().into_iter().filter(|f| f != outcome).collect(),
    };
    let target = data.feature(outcome)?;
    let classification = !target.is_numeric();
    let y = if classification {
        super::logistic::binary_outcome(data, outcome)?
    } else {
        data.column(outcome)?
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature(outcome.to_string()));
    }
    let x = data.design(&features)?;
    let categorical = features
        .iter()
        .map(|f| data.feature(f).map(|s| s.kind != FeatureKind::Numeric))
        .collect::<Result<Vec<_>>>()?;
    let task = if classification {
        Task::BinaryClassification
    } else {
        Task::Regression
    };
    let info = ModelInfo::new("tree_ensemble", task, Provenance::Builtin, features);
    fit_arrays(info, &x, &y, &categorical, classification, config)
}

/// Train on encoded arrays. `categorical[j]` marks columns split by
/// category equality.
pub fn fit_arrays(
    info: ModelInfo,
    x: &[Vec<f64>],
    y: &[f64],
    categorical: &[bool],
    classification: bool,
    config: &TreeConfig,
) -> Result<TreeEnsembleModel> {
    if config.n_trees < 1 || config.max_depth < 1 {
        return Err(Error::InvalidConfig("n_trees and max_depth must be at least 1".into()));
    }
    if !(config.learning_rate > 0.0) || config.min_leaf < 1 {
        return Err(Error::InvalidConfig("learning_rate must be positive, min_leaf >= 1".into()));
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    check_width(x, categorical.len())?;
    if classification && y.iter().all(|v| *v == y[0]) {
        return Err(Error::DegenerateOutcome(info.name.clone()));
    }
    let mut rng = crate::seeded_rng(config.seed);
    let n = x.len();
    let max_leaves = 1usize << config.max_depth.min(30);

    match config.mode {
        EnsembleMode::Boosting => {
            let link = if classification { Link::Logistic } else { Link::Identity };
            let base_score = if classification {
                logit(crate::stats::mean(y))
            } else {
                crate::stats::mean(y)
            };
            let mut margin = vec![base_score; n];
            let mut trees = Vec::with_capacity(config.n_trees);
            let mut loss_history = Vec::with_capacity(config.n_trees);
            let rows: Vec<usize> = (0..n).collect();
            for _ in 0..config.n_trees {
                let (grad, hess) = gradients(&margin, y, classification);
                let tree = TreeBuilder {
                    x,
                    categorical,
                    grad: &grad,
                    hess: &hess,
                    config,
                    feature_subsample: None,
                }
                .build(&rows, &mut rng);
                for (m, row) in margin.iter_mut().zip(x) {
                    *m += config.learning_rate * tree.leaf_value(row);
                }
                loss_history.push(loss(&margin, y, classification));
                trees.push(tree);
            }
            let mut model = TreeEnsembleModel::from_parts(info, trees, config.learning_rate, base_score, link);
            model.max_leaves = max_leaves;
            model.max_depth = config.max_depth;
            model.loss_history = loss_history;
            Ok(model)
        }
        EnsembleMode::Bagging => {
            let per_split = ((categorical.len() as f64).sqrt().ceil() as usize).max(1);
            let grad: Vec<f64> = y.iter().map(|v| -v).collect();
            let hess = vec![1.0; n];
            let mut trees = Vec::with_capacity(config.n_trees);
            let mut sum = vec![0.0; n];
            let mut loss_history = Vec::with_capacity(config.n_trees);
            let cfg = TreeConfig {
                lambda: 0.0,
                ..config.clone()
            };
            for k in 0..config.n_trees {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let tree = TreeBuilder {
                    x,
                    categorical,
                    grad: &grad,
                    hess: &hess,
                    config: &cfg,
                    feature_subsample: Some(per_split),
                }
                .build(&rows, &mut rng);
                for (s, row) in sum.iter_mut().zip(x) {
                    *s += tree.leaf_value(row);
                }
                let avg: Vec<f64> = sum.iter().map(|s| s / (k + 1) as f64).collect();
                loss_history.push(loss(&avg, y, false));
                trees.push(tree);
            }
            let lr = 1.0 / config.n_trees as f64;
            let mut model = TreeEnsembleModel::from_parts(info, trees, lr, 0.0, Link::Identity);
            model.max_leaves = max_leaves;
            model.max_depth = config.max_depth;
            model.loss_history = loss_history;
            Ok(model)
        }
    }
}

fn gradients(margin: &[f64], y: &[f64], classification: bool) -> (Vec<f64>, Vec<f64>) {
    if classification {
        margin
            .iter()
            .zip(y)
            .map(|(&m, &t)| {
                let p = sigmoid(m);
                (p - t, (p * (1.0 - p)).max(1e-16))
            })
            .unzip()
    } else {
        margin.iter().zip(y).map(|(&m, &t)| (m - t, 1.0)).unzip()
    }
}

fn loss(margin: &[f64], y: &[f64], classification: bool) -> f64 {
    let n = y.len() as f64;
    if classification {
        margin
            .iter()
            .zip(y)
            .map(|(&m, &t)| {
                // log(1 + e^m) - t·m, computed stably
                let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
                softplus - t * m
            })
            .sum::<f64>()
            / n
    } else {
        margin.iter().zip(y).map(|(m, t)| (m - t).powi(2)).sum::<f64>() / n
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    categorical: &'a [bool],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a TreeConfig,
    feature_subsample: Option<usize>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    rule: SplitRule,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: &[usize], rng: &mut impl Rng) -> Tree {
        let n_features = self.categorical.len();
        // presorted finite rows per numeric feature
        let sorted: Vec<Vec<usize>> = (0..n_features)
            .map(|j| {
                if self.categorical[j] {
                    return Vec::new();
                }
                let mut idx: Vec<usize> = rows.iter().copied().filter(|&r| self.x[r][j].is_finite()).collect();
                idx.sort_by(|&a, &b| self.x[a][j].total_cmp(&self.x[b][j]));
                idx
            })
            .collect();
        let mut nodes = Vec::new();
        self.grow(rows.to_vec(), sorted, 0, &mut nodes, rng);
        Tree { nodes }
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let value = -g / (h + self.config.lambda);
        Node::Leaf {
            value: if value.is_finite() { value } else { 0.0 },
        }
    }

    fn grow(
        &self,
        rows: Vec<usize>,
        sorted: Vec<Vec<usize>>,
        depth: usize,
        nodes: &mut Vec<Node>,
        rng: &mut impl Rng,
    ) -> usize {
        let id = nodes.len();
        nodes.push(self.leaf(&rows));
        if depth >= self.config.max_depth || rows.len() < 2 * self.config.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(&rows, &sorted, rng) else {
            return id;
        };
        let goes_left = |r: usize| best.rule.goes_left(self.x[r][best.feature]);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| goes_left(r));
        let (mut left_sorted, mut right_sorted) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&r| goes_left(r));
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.grow(left_rows, left_sorted, depth + 1, nodes, rng);
        let right = self.grow(right_rows, right_sorted, depth + 1, nodes, rng);
        nodes[id] = Node::Split {
            feature: best.feature,
            rule: best.rule,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], sorted: &[Vec<usize>], rng: &mut impl Rng) -> Option<Candidate> {
        let lambda = self.config.lambda;
        let min_leaf = self.config.min_leaf;
        let g_tot: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h_tot: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let n_tot = rows.len();
        let parent = g_tot * g_tot / (h_tot + lambda);
        let score = |gl: f64, hl: f64| {
            let gr = g_tot - gl;
            let hr = h_tot - hl;
            gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent
        };
        let n_features = self.categorical.len();
        let mut features: Vec<usize> = match self.feature_subsample {
            Some(k) if k < n_features => sample(rng, n_features, k).into_vec(),
            _ => (0..n_features).collect(),
        };
        features.sort_unstable();

        // Zero-gain splits are allowed while gradients still differ, so that
        // symmetric interactions such as XOR can be reached one level down.
        let heterogeneous = rows.iter().any(|&r| self.grad[r] != self.grad[rows[0]]);
        let min_gain = if heterogeneous { -1e-12 } else { 1e-12 };
        let mut best: Option<Candidate> = None;
        let mut consider = |gain: f64, feature: usize, rule: SplitRule| {
            if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate { gain, feature, rule });
            }
        };
        for j in features {
            if self.categorical[j] {
                let mut stats: Vec<(f64, f64, usize)> = Vec::new();
                for &r in rows {
                    let v = self.x[r][j];
                    if !v.is_finite() || v < 0.0 {
                        continue;
                    }
                    let c = v as usize;
                    if stats.len() <= c {
                        stats.resize(c + 1, (0.0, 0.0, 0));
                    }
                    stats[c].0 += self.grad[r];
                    stats[c].1 += self.hess[r];
                    stats[c].2 += 1;
                }
                for (c, &(g, h, n)) in stats.iter().enumerate() {
                    if n >= min_leaf && n_tot - n >= min_leaf {
                        consider(score(g, h), j, SplitRule::Equals(c as f64));
                    }
                }
            } else {
                let list = &sorted[j];
                let (mut gl, mut hl) = (0.0, 0.0);
                for k in 0..list.len().saturating_sub(1) {
                    let r = list[k];
                    gl += self.grad[r];
                    hl += self.hess[r];
                    let (a, b) = (self.x[r][j], self.x[list[k + 1]][j]);
                    let n_left = k + 1;
                    if a == b || n_left < min_leaf || n_tot - n_left < min_leaf {
                        continue;
                    }
                    let mut threshold = 0.5 * (a + b);
                    if threshold <= a {
                        threshold = b;
                    }
                    consider(score(gl, hl), j, SplitRule::LessThan(threshold));
                }
            }
        }
        best
    }
}
