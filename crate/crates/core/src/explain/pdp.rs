use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::stats::quantile_sorted;
use crate::tabular::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: String,
    /// Encoded grid values, ascending.
    pub grid: Vec<f64>,
    /// Category labels for categorical grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub averages: Vec<f64>,
    pub n_background: usize,
}

/// Partial dependence on a quantile grid (numeric) or on every category.
pub fn compute_pdp(model: &dyn Predictor, data: &Dataset, feature: &str, grid_size: usize) -> Result<PdpCurve> {
    let schema = data
        .feature(feature)
        .map_err(|_| Error::UnknownFeature(feature.to_string()))?;
    if schema.is_numeric() {
        if grid_size == 0 {
            return Err(Error::InvalidConfig("grid_size must be positive".into()));
        }
        let mut values: Vec<f64> = data.column(feature)?.into_iter().filter(|v| v.is_finite()).collect();
        if values.is_empty() {
            return Err(Error::InvalidDataset(format!("`{feature}` has no observed values")));
        }
        values.sort_by(f64::total_cmp);
        let mut grid: Vec<f64> = if grid_size == 1 {
            vec![quantile_sorted(&values, 0.5)]
        } else {
            (0..grid_size)
                .map(|k| quantile_sorted(&values, k as f64 / (grid_size - 1) as f64))
                .collect()
        };
        grid.dedup();
        compute_pdp_on_grid(model, data, feature, &grid)
    } else {
        let grid: Vec<f64> = (0..schema.categories.len()).map(|c| c as f64).collect();
        let mut curve = compute_pdp_on_grid(model, data, feature, &grid)?;
        curve.labels = Some(schema.categories.clone());
        Ok(curve)
    }
}

/// Average prediction with `feature` forced to each grid value in turn.
pub fn compute_pdp_on_grid(model: &dyn Predictor, data: &Dataset, feature: &str, grid: &[f64]) -> Result<PdpCurve> {
    let j = model
        .info()
        .features
        .iter()
        .position(|f| f == feature)
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    let base = data.design(&model.info().features)?;
    if base.is_empty() {
        return Err(Error::InvalidDataset("no rows to average over".into()));
    }
    let averages = grid
        .iter()
        .map(|&v| {
            let rows: Vec<Vec<f64>> = base
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r[j] = v;
                    r
                })
                .collect();
            Ok(crate::stats::mean(&model.predict(&rows)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PdpCurve {
        feature: feature.to_string(),
        grid: grid.to_vec(),
        labels: None,
        averages,
        n_background: base.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FnPredictor, ModelInfo, Provenance, Task};
    use crate::tabular::{Cell, FeatureSchema};

    fn data() -> Dataset {
        let rows = (0..10)
            .map(|i| vec![Cell::Num(f64::from(i)), Cell::Num(f64::from(i * i)), Cell::Cat((i % 3) as u32), Cell::Num(0.0)])
            .collect();
        Dataset::new(
            vec![
                FeatureSchema::numeric("a"),
                FeatureSchema::numeric("b"),
                FeatureSchema::categorical("c", ["p", "q", "r"]),
                FeatureSchema::numeric("y"),
            ],
            rows,
            "y",
        )
        .unwrap()
    }

    fn model(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> FnPredictor<impl Fn(&[f64]) -> f64 + Send + Sync> {
        let info = ModelInfo::new("m", Task::Regression, Provenance::Builtin, vec!["a".into(), "b".into(), "c".into()]);
        FnPredictor::new(info, f)
    }

    #[test]
    fn linear_single_feature() {
        let m = model(|r| 3.0 * r[0]);
        let c = compute_pdp_on_grid(&m, &data(), "a", &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.averages, [0.0, 3.0, 6.0]);
    }

    #[test]
    fn additive_model_component() {
        let g = |v: f64| v.sin() * 2.0;
        let h = |v: f64| 0.1 * v;
        let m = model(move |r| g(r[0]) + h(r[1]));
        let d = data();
        let mean_h = d.column("b").unwrap().iter().map(|&v| h(v)).sum::<f64>() / 10.0;
        let c = compute_pdp(&m, &d, "a", 20).unwrap();
        for (v, avg) in c.grid.iter().zip(&c.averages) {
            assert!((avg - (g(*v) + mean_h)).abs() < 1e-9);
        }
        assert!(c.grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn categorical_grid_and_errors() {
        let m = model(|r| r[2]);
        let c = compute_pdp(&m, &data(), "c", 20).unwrap();
        assert_eq!(c.averages, [0.0, 1.0, 2.0]);
        assert_eq!(c.labels.unwrap(), ["p", "q", "r"]);
        assert_eq!(
            compute_pdp(&m, &data(), "nope", 20).unwrap_err(),
            Error::UnknownFeature("nope".into())
        );
        let flat = compute_pdp(&model(|_| 1.5), &data(), "b", 5).unwrap();
        assert!(flat.averages.iter().all(|v| *v == 1.5));
    }
}
