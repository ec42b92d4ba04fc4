use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Predictor, Task};
use crate::stats::{mad, std_dev};
use crate::tabular::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterfactualConfig {
    /// Numeric step as a fraction of the observed range.
    pub step_frac: f64,
    pub max_iter: usize,
    /// Weight on the distance term of the reported loss.
    pub lambda: f64,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        CounterfactualConfig {
            step_frac: 0.05,
            max_iter: 500,
            lambda: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub features: Vec<String>,
    pub x_orig: Vec<f64>,
    pub x_cf: Vec<f64>,
    pub target: u8,
    /// Model score at `x_cf`.
    pub score: f64,
    /// MAD-standardised L1 for numeric features plus one per changed
    /// category.
    pub distance: f64,
    /// `lambda · distance`; absent when no counterfactual was found.
    pub loss: Option<f64>,
    pub changed_features: Vec<String>,
    pub found: bool,
    pub iterations: usize,
}

enum Kind {
    Fixed,
    Numeric { lo: f64, hi: f64, step: f64, scale: f64 },
    Categorical { n: usize },
}

struct Search<'a> {
    model: &'a dyn Predictor,
    kinds: Vec<Kind>,
    orig: &'a [f64],
    target: u8,
    threshold: f64,
}

impl Search<'_> {
    fn scores(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.model.predict(rows)
    }

    fn hits(&self, p: f64) -> bool {
        (p >= self.threshold) == (self.target == 1)
    }

    /// Higher is closer to the target class.
    fn pull(&self, p: f64) -> f64 {
        if self.target == 1 {
            p
        } else {
            -p
        }
    }

    fn distance(&self, x: &[f64]) -> f64 {
        self.kinds
            .iter()
            .enumerate()
            .map(|(j, k)| match k {
                Kind::Numeric { scale, .. } => (x[j] - self.orig[j]).abs() / scale,
                Kind::Categorical { .. } => f64::from(u8::from(x[j] != self.orig[j])),
                Kind::Fixed => 0.0,
            })
            .sum()
    }

    /// One greedy move: along each numeric direction the first step that
    /// raises the target score, and every category swap. Moves that reach
    /// the target win (closest first); otherwise the best score gain per
    /// unit of added distance.
    fn step(&self, x: &[f64], p: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let mut moves: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
        for (j, kind) in self.kinds.iter().enumerate() {
            match *kind {
                Kind::Numeric { lo, hi, step, .. } => {
                    for dir in [-1.0, 1.0] {
                        let mut path = Vec::new();
                        let mut prev = x[j];
                        for k in 1.. {
                            let v = (x[j] + dir * step * f64::from(k)).clamp(lo, hi);
                            if v == prev {
                                break;
                            }
                            prev = v;
                            let mut c = x.to_vec();
                            c[j] = v;
                            path.push(c);
                        }
                        if !path.is_empty() {
                            moves.push((j, path));
                        }
                    }
                }
                Kind::Categorical { n } => {
                    for c in 0..n {
                        if c as f64 != x[j] {
                            let mut r = x.to_vec();
                            r[j] = c as f64;
                            moves.push((j, vec![r]));
                        }
                    }
                }
                Kind::Fixed => {}
            }
        }
        let flat: Vec<Vec<f64>> = moves.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
        let scores = self.scores(&flat)?;
        let base_pull = self.pull(p);
        let base_dist = self.distance(x);
        let mut reaching: Option<(f64, usize)> = None;
        let mut improving: Option<(f64, usize)> = None;
        let mut offset = 0;
        for (_, path) in &moves {
            for k in 0..path.len() {
                let i = offset + k;
                let gain = self.pull(scores[i]) - base_pull;
                if self.hits(scores[i]) {
                    let d = self.distance(&flat[i]);
                    if reaching.is_none_or(|(bd, _)| d < bd) {
                        reaching = Some((d, i));
                    }
                    break;
                }
                if gain > 0.0 {
                    let added = (self.distance(&flat[i]) - base_dist).max(1e-12);
                    let rate = gain / added;
                    if improving.is_none_or(|(br, _)| rate > br) {
                        improving = Some((rate, i));
                    }
                    break;
                }
            }
            offset += path.len();
        }
        Ok(reaching.or(improving).map(|(_, i)| (flat[i].clone(), scores[i])))
    }

    /// Moves each changed feature back toward the original as far as the
    /// target class allows.
    fn shrink(&self, x: &mut [f64], p: &mut f64) -> Result<()> {
        for _ in 0..5 {
            let mut moved = false;
            for (j, kind) in self.kinds.iter().enumerate() {
                if x[j] == self.orig[j] {
                    continue;
                }
                match kind {
                    Kind::Numeric { .. } => {
                        let (o, c) = (self.orig[j], x[j]);
                        let (mut lo, mut hi) = (0.0f64, 1.0f64);
                        let at = |t: f64| -> Result<f64> {
                            let mut r = x.to_vec();
                            r[j] = o + t * (c - o);
                            Ok(self.scores(&[r])?[0])
                        };
                        let mut best = *p;
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            let s = at(mid)?;
                            if self.hits(s) {
                                hi = mid;
                                best = s;
                            } else {
                                lo = mid;
                            }
                        }
                        let v = o + hi * (c - o);
                        if v != c {
                            x[j] = v;
                            *p = best;
                            moved = true;
                        }
                    }
                    Kind::Categorical { .. } => {
                        let mut r = x.to_vec();
                        r[j] = self.orig[j];
                        let s = self.scores(&[r])?[0];
                        if self.hits(s) {
                            x[j] = self.orig[j];
                            *p = s;
                            moved = true;
                        }
                    }
                    Kind::Fixed => {}
                }
            }
            if !moved {
                break;
            }
        }
        Ok(())
    }
}

/// Greedy search for a nearby row the model assigns to `target_class`,
/// changing only features marked mutable in `data`'s schema, followed by a
/// per-feature bisection back toward the original row.
pub fn find_counterfactual(
    model: &dyn Predictor,
    data: &Dataset,
    row: &[f64],
    target_class: u8,
    config: &CounterfactualConfig,
) -> Result<CounterfactualResult> {
    if model.info().task != Task::BinaryClassification {
        return Err(Error::Unsupported("counterfactuals need a binary classifier".into()));
    }
    if target_class > 1 {
        return Err(Error::InvalidConfig("target class must be 0 or 1".into()));
    }
    if !(config.step_frac > 0.0 && config.step_frac <= 1.0) {
        return Err(Error::InvalidConfig("step_frac must lie in (0, 1]".into()));
    }
    let features = &model.info().features;
    if row.len() != features.len() {
        return Err(Error::FeatureCount {
            expected: features.len(),
            found: row.len(),
        });
    }
    let mut kinds = Vec::with_capacity(features.len());
    for f in features {
        let schema = data.feature(f)?;
        if !schema.mutable {
            kinds.push(Kind::Fixed);
        } else if schema.is_numeric() {
            let values: Vec<f64> = data.column(f)?.into_iter().filter(|v| v.is_finite()).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                kinds.push(Kind::Fixed);
                continue;
            }
            let scale = [mad(&values), std_dev(&values), 1.0]
                .into_iter()
                .find(|s| *s > 0.0)
                .unwrap_or(1.0);
            kinds.push(Kind::Numeric {
                lo,
                hi,
                step: config.step_frac * (hi - lo),
                scale,
            });
        } else {
            kinds.push(Kind::Categorical {
                n: schema.categories.len(),
            });
        }
    }
    if kinds.iter().all(|k| matches!(k, Kind::Fixed)) {
        return Err(Error::NoMutableFeatures);
    }
    let search = Search {
        model,
        kinds,
        orig: row,
        target: target_class,
        threshold: model.info().threshold,
    };
    let mut p = search.scores(&[row.to_vec()])?[0];
    if search.hits(p) {
        return Err(Error::AlreadyTargetClass);
    }
    let mut x = row.to_vec();
    let mut iterations = 0;
    while iterations < config.max_iter && !search.hits(p) {
        iterations += 1;
        match search.step(&x, p)? {
            Some((next, s)) => {
                x = next;
                p = s;
            }
            None => break,
        }
    }
    let found = search.hits(p);
    if found {
        search.shrink(&mut x, &mut p)?;
    }
    let distance = search.distance(&x);
    let changed_features = features
        .iter()
        .enumerate()
        .filter(|(j, _)| x[*j] != row[*j])
        .map(|(_, f)| f.clone())
        .collect();
    Ok(CounterfactualResult {
        features: features.clone(),
        x_orig: row.to_vec(),
        x_cf: x,
        target: target_class,
        score: p,
        distance,
        loss: found.then_some(config.lambda * distance),
        changed_features,
        found,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FnPredictor, ModelInfo, Provenance};
    use crate::tabular::{Cell, FeatureSchema};

    fn grid_data(n: usize, width: usize) -> Dataset {
        let mut schema: Vec<FeatureSchema> = (0..width).map(|j| FeatureSchema::numeric(format!("x{j}"))).collect();
        schema.push(FeatureSchema::binary("y"));
        let rows = (0..=n)
            .map(|i| {
                let mut r: Vec<Cell> = (0..width).map(|_| Cell::Num(10.0 * i as f64 / n as f64)).collect();
                r.push(Cell::Cat((i % 2) as u32));
                r
            })
            .collect();
        Dataset::new(schema, rows, "y").unwrap()
    }

    fn classifier(width: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> impl Predictor {
        let info = ModelInfo::new(
            "c",
            Task::BinaryClassification,
            Provenance::Builtin,
            (0..width).map(|j| format!("x{j}")).collect(),
        );
        FnPredictor::new(info, f)
    }

    #[test]
    fn threshold_crossing() {
        let m = classifier(1, |r| f64::from(u8::from(r[0] > 5.0)));
        let r = find_counterfactual(&m, &grid_data(10, 1), &[4.0], 1, &CounterfactualConfig::default()).unwrap();
        assert!(r.found);
        assert_eq!(r.changed_features, ["x0"]);
        let step = 0.05 * 10.0;
        assert!(r.x_cf[0] > 5.0 && r.x_cf[0] <= 5.0 + step, "{}", r.x_cf[0]);
    }

    #[test]
    fn errors() {
        let m = classifier(1, |r| f64::from(u8::from(r[0] > 5.0)));
        let d = grid_data(10, 1);
        let cfg = CounterfactualConfig::default();
        assert_eq!(find_counterfactual(&m, &d, &[6.0], 1, &cfg).unwrap_err(), Error::AlreadyTargetClass);
        let frozen = d.with_mutability(&[]);
        assert_eq!(find_counterfactual(&m, &frozen, &[4.0], 1, &cfg).unwrap_err(), Error::NoMutableFeatures);
    }

    #[test]
    fn unreachable_target_not_found() {
        let m = classifier(1, |_| 0.1);
        let r = find_counterfactual(&m, &grid_data(10, 1), &[4.0], 1, &CounterfactualConfig::default()).unwrap();
        assert!(!r.found);
        assert_eq!(r.x_cf, [4.0]);
    }

    #[test]
    fn immutables_untouched() {
        let m = classifier(2, |r| f64::from(u8::from(r[0] + r[1] > 12.0)));
        let d = grid_data(10, 2).with_mutability(&["x1".into()]);
        let r = find_counterfactual(&m, &d, &[5.0, 5.0], 1, &CounterfactualConfig::default()).unwrap();
        assert!(r.found);
        assert_eq!(r.x_cf[0], 5.0);
        assert_eq!(r.changed_features, ["x1"]);
    }
}
