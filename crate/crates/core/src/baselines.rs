//! Reference models that every rating is compared against: one that
//! predicts at random and one that predicts from the protected attribute
//! alone.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{Forecaster, ModelInfo, Predictor, Provenance, Task};
use crate::tabular::{Dataset, GroupPartition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    Biased,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    #[serde(default)]
    pub seed: u64,
    /// Protected attribute (biased only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<String>,
    /// Output per group label (biased only). For forecasting these are
    /// additive offsets on the base forecast.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_outputs: Option<BTreeMap<String, f64>>,
    /// `[lo, hi]` for random regression and forecasting outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression_range: Option<(f64, f64)>,
}

impl BaselineConfig {
    pub fn random(seed: u64) -> Self {
        BaselineConfig {
            kind: BaselineKind::Random,
            seed,
            protected: None,
            group_outputs: None,
            regression_range: None,
        }
    }

    pub fn biased(protected: impl Into<String>) -> Self {
        BaselineConfig {
            kind: BaselineKind::Biased,
            seed: 0,
            protected: Some(protected.into()),
            group_outputs: None,
            regression_range: None,
        }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.regression_range = Some((lo, hi));
        self
    }

    pub fn with_outputs(mut self, outputs: BTreeMap<String, f64>) -> Self {
        self.group_outputs = Some(outputs);
        self
    }
}

fn checked_range(range: Option<(f64, f64)>) -> Result<(f64, f64)> {
    match range {
        Some((lo, hi)) if lo < hi && lo.is_finite() && hi.is_finite() => Ok((lo, hi)),
        Some((lo, hi)) => Err(Error::InvalidConfig(format!("regression range [{lo}, {hi}] is empty"))),
        None => Err(Error::MissingRange),
    }
}

/// `[min, max]` of the finite values, if they span a nonempty interval.
pub fn observed_range(values: &[f64]) -> Option<(f64, f64)> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (lo < hi).then_some((lo, hi))
}

/// Each `predict` call draws a fresh i.i.d. stream from the seed, so equal
/// batches get equal outputs.
#[derive(Debug, Clone)]
pub struct RandomBaseline {
    info: ModelInfo,
    seed: u64,
    range: Option<(f64, f64)>,
}

impl Predictor for RandomBaseline {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut rng = crate::seeded_rng(self.seed);
        Ok(match self.range {
            None => rows.iter().map(|_| f64::from(u8::from(rng.random::<bool>()))).collect(),
            Some((lo, hi)) => rows.iter().map(|_| rng.random_range(lo..hi)).collect(),
        })
    }
}

/// Random reference model. Classification emits hard 0/1 scores;
/// regression draws uniformly from the configured range, or from the
/// observed outcome range when none is configured.
pub fn make_random_baseline(task: Task, config: &BaselineConfig, observed: Option<&[f64]>) -> Result<RandomBaseline> {
    let range = match task {
        Task::BinaryClassification => None,
        _ => Some(checked_range(config.regression_range.or_else(|| observed.and_then(observed_range)))?),
    };
    Ok(RandomBaseline {
        info: ModelInfo::new("random_baseline", task, Provenance::Baseline, Vec::new()),
        seed: config.seed,
        range,
    })
}

/// Output depends only on the protected attribute's category.
#[derive(Debug, Clone)]
pub struct BiasedBaseline {
    info: ModelInfo,
    /// Indexed by category code of the protected attribute.
    outputs: Vec<Option<f64>>,
    categories: Vec<String>,
}

impl BiasedBaseline {
    pub fn group_outputs(&self) -> BTreeMap<String, f64> {
        self.categories
            .iter()
            .zip(&self.outputs)
            .filter_map(|(c, o)| o.map(|o| (c.clone(), o)))
            .collect()
    }
}

impl Predictor for BiasedBaseline {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        crate::models::check_width(rows, 1)?;
        rows.iter()
            .map(|r| {
                let code = r[0];
                let slot = (code.is_finite() && code >= 0.0).then(|| self.outputs.get(code as usize)).flatten();
                match slot {
                    Some(Some(v)) => Ok(*v),
                    _ => Err(Error::UncoveredGroup(
                        self.categories
                            .get(code as usize)
                            .cloned()
                            .unwrap_or_else(|| "<missing>".into()),
                    )),
                }
            })
            .collect()
    }
}

/// Default group outputs: the lexicographically first label gets the
/// favourable value, all others the unfavourable one.
pub fn default_group_outputs(labels: &[&str], favourable: f64, unfavourable: f64) -> BTreeMap<String, f64> {
    let first = labels.iter().min().copied();
    labels
        .iter()
        .map(|l| (l.to_string(), if Some(*l) == first { favourable } else { unfavourable }))
        .collect()
}

/// Biased reference model over `partition.attribute`. Classification
/// defaults to scores 1/0; regression defaults to mean + 1 SD / mean of
/// the dataset outcome.
pub fn make_biased_baseline(
    data: &Dataset,
    partition: &GroupPartition,
    task: Task,
    config: &BaselineConfig,
) -> Result<BiasedBaseline> {
    let feature = data.feature(&partition.attribute)?;
    let labels = partition.labels();
    let outputs = match &config.group_outputs {
        Some(o) => o.clone(),
        None => match task {
            Task::BinaryClassification => default_group_outputs(&labels, 1.0, 0.0),
            _ => {
                let y: Vec<f64> = data.outcome_values().into_iter().filter(|v| v.is_finite()).collect();
                let m = crate::stats::mean(&y);
                default_group_outputs(&labels, m + crate::stats::std_dev(&y), m)
            }
        },
    };
    if let Some(missing) = labels.iter().find(|l| !outputs.contains_key(**l)) {
        return Err(Error::UncoveredGroup(missing.to_string()));
    }
    if task == Task::BinaryClassification {
        if let Some(bad) = outputs.values().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::CodomainViolation(*bad));
        }
    }
    Ok(BiasedBaseline {
        info: ModelInfo::new(
            "biased_baseline",
            task,
            Provenance::Baseline,
            vec![partition.attribute.clone()],
        ),
        outputs: feature.categories.iter().map(|c| outputs.get(c).copied()).collect(),
        categories: feature.categories.clone(),
    })
}

fn history_seed(seed: u64, group: &str, history: &[f64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(group.as_bytes());
    h.update([0]);
    for v in history {
        h.update(v.to_bits().to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest has 8 bytes"))
}

/// Uniform forecasts; the stream is keyed by series and history so every
/// window gets its own draws.
#[derive(Debug, Clone)]
pub struct RandomForecaster {
    info: ModelInfo,
    seed: u64,
    range: (f64, f64),
}

impl Forecaster for RandomForecaster {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn forecast(&self, group: &str, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let mut rng = crate::seeded_rng(history_seed(self.seed, group, history));
        let (lo, hi) = self.range;
        Ok((0..horizon).map(|_| rng.random_range(lo..hi)).collect())
    }
}

pub fn make_random_forecaster(config: &BaselineConfig, observed: Option<&[f64]>) -> Result<RandomForecaster> {
    let range = checked_range(config.regression_range.or_else(|| observed.and_then(observed_range)))?;
    Ok(RandomForecaster {
        info: ModelInfo::new("random_baseline", Task::Forecasting, Provenance::Baseline, Vec::new()),
        seed: config.seed,
        range,
    })
}

/// Base forecast shifted by a per-group constant.
#[derive(Debug, Clone)]
pub struct BiasedForecaster {
    info: ModelInfo,
    base: Arc<dyn Forecaster>,
    offsets: BTreeMap<String, f64>,
}

impl BiasedForecaster {
    pub fn offsets(&self) -> &BTreeMap<String, f64> {
        &self.offsets
    }
}

impl Forecaster for BiasedForecaster {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn forecast(&self, group: &str, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let offset = *self
            .offsets
            .get(group)
            .ok_or_else(|| Error::UncoveredGroup(group.to_string()))?;
        Ok(self
            .base
            .forecast(group, history, horizon)?
            .into_iter()
            .map(|v| v + offset)
            .collect())
    }
}

/// Offsets default to one SD of `observed` for the lexicographically first
/// group and zero for the rest.
pub fn make_biased_forecaster(
    base: Arc<dyn Forecaster>,
    groups: &[&str],
    config: &BaselineConfig,
    observed: &[f64],
) -> Result<BiasedForecaster> {
    let offsets = match &config.group_outputs {
        Some(o) => o.clone(),
        None => default_group_outputs(groups, crate::stats::std_dev(observed), 0.0),
    };
    if let Some(missing) = groups.iter().find(|g| !offsets.contains_key(**g)) {
        return Err(Error::UncoveredGroup(missing.to_string()));
    }
    Ok(BiasedForecaster {
        info: ModelInfo::new("biased_baseline", Task::Forecasting, Provenance::Baseline, Vec::new()),
        base,
        offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{partition_by, Cell, FeatureSchema};

    fn empty_rows(n: usize) -> Vec<Vec<f64>> {
        vec![Vec::new(); n]
    }

    #[test]
    fn random_is_seed_deterministic() {
        let m = make_random_baseline(Task::BinaryClassification, &BaselineConfig::random(7), None).unwrap();
        let a = m.predict(&empty_rows(10)).unwrap();
        assert_eq!(a, m.predict(&empty_rows(10)).unwrap());
        assert!(a.iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn random_classification_rate() {
        let m = make_random_baseline(Task::BinaryClassification, &BaselineConfig::random(11), None).unwrap();
        let s = m.predict(&empty_rows(100_000)).unwrap();
        let frac = s.iter().sum::<f64>() / s.len() as f64;
        assert!((0.494..=0.506).contains(&frac), "{frac}");
    }

    #[test]
    fn random_regression_mean_and_ks() {
        let cfg = BaselineConfig::random(3).with_range(0.0, 1.0);
        let m = make_random_baseline(Task::Regression, &cfg, None).unwrap();
        let mut s = m.predict(&empty_rows(100_000)).unwrap();
        let mean = crate::stats::mean(&s);
        assert!((0.497..=0.503).contains(&mean), "{mean}");
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, v)| (v - i as f64 / n).abs().max((v - (i + 1) as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn missing_range() {
        assert_eq!(
            make_random_baseline(Task::Regression, &BaselineConfig::random(1), None).unwrap_err(),
            Error::MissingRange
        );
        let m = make_random_baseline(Task::Regression, &BaselineConfig::random(1), Some(&[2.0, 4.0])).unwrap();
        assert!(m.predict(&empty_rows(100)).unwrap().iter().all(|v| (2.0..4.0).contains(v)));
    }

    fn grouped() -> Dataset {
        let schema = vec![
            FeatureSchema::categorical("sex", ["female", "male"]),
            FeatureSchema::numeric("x"),
            FeatureSchema::binary("y"),
        ];
        let rows = (0..20)
            .map(|i| vec![Cell::Cat(i % 2), Cell::Num(f64::from(i)), Cell::Cat((i / 3) % 2)])
            .collect();
        Dataset::new(schema, rows, "y").unwrap()
    }

    #[test]
    fn biased_depends_only_on_group() {
        let d = grouped();
        let p = partition_by(&d, "sex").unwrap();
        let outputs = BTreeMap::from([("male".to_string(), 1.0), ("female".to_string(), 0.0)]);
        let cfg = BaselineConfig::biased("sex").with_outputs(outputs);
        let m = make_biased_baseline(&d, &p, Task::BinaryClassification, &cfg).unwrap();
        let s = crate::models::predict_dataset(&m, &d).unwrap();
        for (group, rows) in &p.groups {
            let want = if group == "male" { 1.0 } else { 0.0 };
            assert!(rows.iter().all(|&r| s[r] == want));
        }
    }

    #[test]
    fn biased_default_and_coverage() {
        let d = grouped();
        let p = partition_by(&d, "sex").unwrap();
        let m = make_biased_baseline(&d, &p, Task::BinaryClassification, &BaselineConfig::biased("sex")).unwrap();
        assert_eq!(m.group_outputs()["female"], 1.0);
        assert_eq!(m.group_outputs()["male"], 0.0);
        let partial = BaselineConfig::biased("sex").with_outputs(BTreeMap::from([("male".to_string(), 1.0)]));
        assert_eq!(
            make_biased_baseline(&d, &p, Task::BinaryClassification, &partial).unwrap_err(),
            Error::UncoveredGroup("female".into())
        );
    }

    #[derive(Debug)]
    struct Oracle(Vec<f64>);

    impl Forecaster for Oracle {
        fn info(&self) -> &ModelInfo {
            unimplemented!()
        }

        fn forecast(&self, _group: &str, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
            Ok(self.0[history.len()..history.len() + horizon].to_vec())
        }
    }

    #[test]
    fn biased_forecaster_offsets_residuals() {
        let truth: Vec<f64> = (0..40).map(|t| 100.0 + f64::from(t)).collect();
        let offsets = BTreeMap::from([("META".to_string(), 50.0), ("AAPL".to_string(), 0.0)]);
        let cfg = BaselineConfig::biased("Company").with_outputs(offsets);
        let m = make_biased_forecaster(Arc::new(Oracle(truth.clone())), &["META", "AAPL"], &cfg, &truth).unwrap();
        let residual = |g: &str| {
            let f = m.forecast(g, &truth[..30], 10).unwrap();
            f.iter().zip(&truth[30..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        assert!((residual("META") - residual("AAPL") - 50.0).abs() < 1e-9);
        assert!(matches!(m.forecast("IBM", &truth[..30], 1), Err(Error::UncoveredGroup(_))));
    }
}
