use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ShapMethod, ShapResult, ShapScale, DEFAULT_BACKGROUND};
use crate::error::{Error, Result};
use crate::models::{Link, Node, Predictor, Tree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    /// Exact enumeration limit; wider models fall back to sampling.
    pub max_features: usize,
    pub n_permutations: usize,
    pub background_size: usize,
    pub seed: u64,
    /// Use the tree algorithm whenever the model is a tree ensemble.
    pub prefer_tree: bool,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            max_features: 14,
            n_permutations: 2000,
            background_size: DEFAULT_BACKGROUND,
            seed: 0,
            prefer_tree: true,
        }
    }
}

/// Picks the tree algorithm, exact enumeration or permutation sampling.
pub fn explain_shap(
    model: &dyn Predictor,
    row: &[f64],
    background: &[Vec<f64>],
    config: &ShapConfig,
) -> Result<ShapResult> {
    if config.prefer_tree && model.as_tree_ensemble().is_some() {
        return tree_shap(model, row, background);
    }
    if row.len() <= config.max_features {
        shapley_exact(model, row, background, config.max_features)
    } else {
        shapley_sampled(model, row, background, config.n_permutations, config.seed)
    }
}

fn check_inputs(model: &dyn Predictor, row: &[f64], background: &[Vec<f64>]) -> Result<()> {
    let m = model.info().features.len();
    if row.len() != m {
        return Err(Error::FeatureCount {
            expected: m,
            found: row.len(),
        });
    }
    if background.is_empty() {
        return Err(Error::InvalidConfig("background sample is empty".into()));
    }
    crate::models::check_width(background, m)
}

const BATCH_ROWS: usize = 1 << 16;

/// Exact interventional Shapley values by enumerating all `2^M`
/// coalitions.
pub fn shapley_exact(
    model: &dyn Predictor,
    row: &[f64],
    background: &[Vec<f64>],
    max_features: usize,
) -> Result<ShapResult> {
    check_inputs(model, row, background)?;
    let m = row.len();
    if m > max_features {
        return Err(Error::TooManyFeatures {
            count: m,
            max: max_features,
        });
    }
    let n_masks = 1usize << m;
    let per_batch = (BATCH_ROWS / background.len()).max(1);
    let mut value = Vec::with_capacity(n_masks);
    let mut mask = 0usize;
    while mask < n_masks {
        let end = (mask + per_batch).min(n_masks);
        let mut rows = Vec::with_capacity((end - mask) * background.len());
        for s in mask..end {
            for z in background {
                rows.push(
                    (0..m)
                        .map(|j| if s >> j & 1 == 1 { row[j] } else { z[j] })
                        .collect::<Vec<f64>>(),
                );
            }
        }
        let preds = model.predict(&rows)?;
        value.extend(preds.chunks(background.len()).map(crate::stats::mean));
        mask = end;
    }

    // weight(|S|) = |S|!(M−|S|−1)!/M! = 1 / (M · C(M−1, |S|))
    let weights: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let mut phis = vec![0.0; m];
    for s in 0..n_masks {
        let size = s.count_ones() as usize;
        for (j, phi) in phis.iter_mut().enumerate() {
            if s >> j & 1 == 0 {
                *phi += weights[size] * (value[s | 1 << j] - value[s]);
            }
        }
    }
    Ok(ShapResult::new(
        model.info().features.clone(),
        value[0],
        phis,
        value[n_masks - 1],
        ShapMethod::Exact,
        ShapScale::Output,
        background.len(),
    ))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Permutation-sampling estimate. Permutation `p` pairs with background
/// row `p mod n`, so when the permutation count is a multiple of the
/// background size the efficiency gap vanishes.
pub fn shapley_sampled(
    model: &dyn Predictor,
    row: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<ShapResult> {
    check_inputs(model, row, background)?;
    if n_permutations == 0 {
        return Err(Error::InvalidConfig("n_permutations must be positive".into()));
    }
    let m = row.len();
    let mut rng = crate::seeded_rng(seed);
    let mut phis = vec![0.0; m];
    let per_batch = (BATCH_ROWS / (m + 1)).max(1);
    let mut order: Vec<usize> = (0..m).collect();
    let mut done = 0;
    while done < n_permutations {
        let end = (done + per_batch).min(n_permutations);
        let mut rows = Vec::with_capacity((end - done) * (m + 1));
        let mut orders = Vec::with_capacity(end - done);
        for p in done..end {
            order.shuffle(&mut rng);
            let mut cur = background[p % background.len()].clone();
            rows.push(cur.clone());
            for &j in &order {
                cur[j] = row[j];
                rows.push(cur.clone());
            }
            orders.push(order.clone());
        }
        let preds = model.predict(&rows)?;
        for (chunk, ord) in preds.chunks(m + 1).zip(&orders) {
            for (k, &j) in ord.iter().enumerate() {
                phis[j] += chunk[k + 1] - chunk[k];
            }
        }
        done = end;
    }
    for p in &mut phis {
        *p /= n_permutations as f64;
    }
    let phi0 = crate::stats::mean(&model.predict(background)?);
    let fx = model.predict(&[row.to_vec()])?[0];
    Ok(ShapResult::new(
        model.info().features.clone(),
        phi0,
        phis,
        fx,
        ShapMethod::Sampled,
        ShapScale::Output,
        background.len(),
    ))
}

/// Interventional TreeSHAP: for each background row, every leaf reachable
/// by mixing the explained row and the background row is a unanimity game
/// over the features whose splits disagree, which has a closed-form
/// Shapley value. Results are averaged over the background. Logistic
/// ensembles are explained on the margin.
pub fn tree_shap(model: &dyn Predictor, row: &[f64], background: &[Vec<f64>]) -> Result<ShapResult> {
    let ensemble = model.as_tree_ensemble().ok_or(Error::NonTreeModel)?;
    check_inputs(model, row, background)?;
    let m = row.len();
    let max_path = ensemble.max_depth + 1;
    let fact: Vec<f64> = std::iter::once(1.0)
        .chain((1..=max_path).scan(1.0, |acc, k| {
            *acc *= k as f64;
            Some(*acc)
        }))
        .collect();
    let mut phis = vec![0.0; m];
    let mut walk = Walk {
        x: row,
        z: &[],
        assign: vec![0; m],
        on: Vec::new(),
        off: Vec::new(),
        fact: &fact,
        phis: &mut phis,
        scale: ensemble.learning_rate,
    };
    for z in background {
        walk.z = z;
        for tree in &ensemble.trees {
            walk.visit(tree, 0);
        }
    }
    let n = background.len() as f64;
    for p in &mut phis {
        *p /= n;
    }
    let phi0 = background.iter().map(|z| ensemble.margin(z)).sum::<f64>() / n;
    let scale = match ensemble.link {
        Link::Identity => ShapScale::Output,
        Link::Logistic => ShapScale::Margin,
    };
    Ok(ShapResult::new(
        model.info().features.clone(),
        phi0,
        phis,
        ensemble.margin(row),
        ShapMethod::Tree,
        scale,
        background.len(),
    ))
}

struct Walk<'a> {
    x: &'a [f64],
    z: &'a [f64],
    /// +1: taken from `x`, −1: taken from `z`, 0: not yet decided.
    assign: Vec<i8>,
    on: Vec<usize>,
    off: Vec<usize>,
    fact: &'a [f64],
    phis: &'a mut [f64],
    scale: f64,
}

impl Walk<'_> {
    fn visit(&mut self, tree: &Tree, i: usize) {
        match &tree.nodes[i] {
            Node::Leaf { value } => self.leaf(self.scale * value),
            Node::Split {
                feature,
                rule,
                left,
                right,
            } => {
                let f = *feature;
                let pick = |goes_left: bool| if goes_left { *left } else { *right };
                let xc = pick(rule.goes_left(self.x[f]));
                let zc = pick(rule.goes_left(self.z[f]));
                match self.assign[f] {
                    1 => self.visit(tree, xc),
                    -1 => self.visit(tree, zc),
                    _ if xc == zc => self.visit(tree, xc),
                    _ => {
                        self.assign[f] = 1;
                        self.on.push(f);
                        self.visit(tree, xc);
                        self.on.pop();
                        self.assign[f] = -1;
                        self.off.push(f);
                        self.visit(tree, zc);
                        self.off.pop();
                        self.assign[f] = 0;
                    }
                }
            }
        }
    }

    fn leaf(&mut self, v: f64) {
        let (a, b) = (self.on.len(), self.off.len());
        if a + b == 0 || v == 0.0 {
            return;
        }
        let total = self.fact[a + b];
        if a > 0 {
            let w = v * self.fact[a - 1] * self.fact[b] / total;
            for &j in &self.on {
                self.phis[j] += w;
            }
        }
        if b > 0 {
            let w = v * self.fact[a] * self.fact[b - 1] / total;
            for &j in &self.off {
                self.phis[j] -= w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FnPredictor, ModelInfo, Provenance, SplitRule, Task, TreeEnsembleModel};

    fn info(m: usize) -> ModelInfo {
        ModelInfo::new("f", Task::Regression, Provenance::Builtin, (0..m).map(|j| format!("x{j}")).collect())
    }

    #[test]
    fn linear_closed_form() {
        let w = [1.5, -2.0, 0.5];
        let f = FnPredictor::new(info(3), move |r: &[f64]| 0.3 + w.iter().zip(r).map(|(a, b)| a * b).sum::<f64>());
        let bg = vec![vec![0.0, 1.0, 2.0], vec![2.0, 3.0, -1.0], vec![1.0, 1.0, 1.0]];
        let row = [4.0, -1.0, 0.5];
        let r = shapley_exact(&f, &row, &bg, 14).unwrap();
        for j in 0..3 {
            let mean = bg.iter().map(|z| z[j]).sum::<f64>() / 3.0;
            assert!((r.phis[j] - w[j] * (row[j] - mean)).abs() < 1e-9);
        }
        assert!(r.efficiency_gap.abs() < 1e-9);
    }

    #[test]
    fn symmetry_and_null_player() {
        let f = FnPredictor::new(info(3), |r: &[f64]| r[0] + r[1]);
        let r = shapley_exact(&f, &[2.0, 2.0, 9.0], &[vec![0.0, 0.0, 1.0]], 14).unwrap();
        assert_eq!(r.phis[0], r.phis[1]);
        assert_eq!(r.phis[2], 0.0);
        let c = FnPredictor::new(info(2), |_: &[f64]| 4.0);
        let r = shapley_exact(&c, &[1.0, 2.0], &[vec![0.0, 0.0]], 14).unwrap();
        assert_eq!((r.phi0, r.phis.clone()), (4.0, vec![0.0, 0.0]));
    }

    #[test]
    fn too_many_features() {
        let f = FnPredictor::new(info(15), |_: &[f64]| 0.0);
        assert_eq!(
            shapley_exact(&f, &[0.0; 15], &[vec![0.0; 15]], 14).unwrap_err(),
            Error::TooManyFeatures { count: 15, max: 14 }
        );
        assert_eq!(tree_shap(&f, &[0.0; 15], &[vec![0.0; 15]]).unwrap_err(), Error::NonTreeModel);
    }

    #[test]
    fn stump_hand_computed() {
        // x0 < 1 → 2, else 5; one background row at x0 = 0
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    rule: SplitRule::LessThan(1.0),
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 2.0 },
                Node::Leaf { value: 5.0 },
            ],
        };
        let m = TreeEnsembleModel::from_parts(info(2), vec![tree], 1.0, 0.0, Link::Identity);
        let r = tree_shap(&m, &[3.0, 7.0], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(r.phis, [3.0, 0.0]);
        assert_eq!(r.phi0, 2.0);
        // two background rows, one on each side: v(∅) = 3.5, v({0}) = 5
        let r = tree_shap(&m, &[3.0, 7.0], &[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(r.phis, [1.5, 0.0]);
        let same = tree_shap(&m, &[3.0, 7.0], &[vec![3.0, 7.0]]).unwrap();
        assert_eq!(same.phis, [0.0, 0.0]);
    }

    #[test]
    fn sampled_is_efficient_with_cycled_background() {
        let f = FnPredictor::new(info(3), |r: &[f64]| r[0] * r[1] + r[2]);
        let bg = vec![vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0]];
        let r = shapley_sampled(&f, &[2.0, 3.0, 1.0], &bg, 400, 1).unwrap();
        assert!(r.efficiency_gap.abs() < 1e-9);
        let exact = shapley_exact(&f, &[2.0, 3.0, 1.0], &bg, 14).unwrap();
        for (a, b) in r.phis.iter().zip(&exact.phis) {
            assert!((a - b).abs() < 0.2, "{a} vs {b}");
        }
    }
}
