use hxai_core::explain::{
    find_counterfactual, fit_ts_surrogate, shapley_exact, tree_shap, CounterfactualConfig, SurrogateConfig,
};
use hxai_core::models::{
    fit_arrays, train_forecaster_pooled, FnPredictor, ForecasterConfig, ModelInfo, Predictor, Provenance, Task,
    TreeConfig,
};
use hxai_core::stats::sigmoid;
use hxai_core::tabular::{Cell, Dataset, FeatureSchema};
use hxai_core::timeseries::{default_market, sliding_window};
use proptest::prelude::*;
use rand::Rng;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("x{j}")).collect()
}

fn random_ensemble(m: usize, seed: u64, classification: bool) -> (hxai_core::models::TreeEnsembleModel, Vec<Vec<f64>>) {
    let mut rng = hxai_core::seeded_rng(seed);
    let x: Vec<Vec<f64>> = (0..120)
        .map(|_| (0..m).map(|_| rng.random_range(0..4) as f64).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| {
            let s = r[0] * r[m - 1] - r[1 % m] + rng.random_range(-1.0..1.0);
            if classification {
                f64::from(u8::from(s > 1.0))
            } else {
                s
            }
        })
        .collect();
    let categorical: Vec<bool> = (0..m).map(|j| j % 3 == 2).collect();
    let task = if classification { Task::BinaryClassification } else { Task::Regression };
    let cfg = TreeConfig {
        n_trees: 5,
        max_depth: 3,
        min_leaf: 2,
        seed,
        ..TreeConfig::default()
    };
    let info = ModelInfo::new("t", task, Provenance::Builtin, names(m));
    (fit_arrays(info, &x, &y, &categorical, classification, &cfg).unwrap(), x)
}

#[test]
fn tree_shap_matches_enumeration_on_six_features() {
    let (model, x) = random_ensemble(6, 3, false);
    let bg = &x[..30];
    let t = tree_shap(&model, &x[50], bg).unwrap();
    let e = shapley_exact(&model, &x[50], bg, 14).unwrap();
    for (a, b) in t.phis.iter().zip(&e.phis) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert!(t.efficiency_gap.abs() < 1e-6);
}

#[test]
fn identical_background_gives_zero_attributions() {
    let (model, x) = random_ensemble(4, 9, false);
    let row = x[7].clone();
    let r = tree_shap(&model, &row, &vec![row.clone(); 5]).unwrap();
    assert!(r.phis.iter().all(|p| *p == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn tree_shap_equals_exact(seed in 0u64..10_000, m in 2usize..=10, classification: bool, pick in 0usize..120) {
        let (model, x) = random_ensemble(m, seed, classification);
        let bg = &x[..12];
        let t = tree_shap(&model, &x[pick], bg).unwrap();
        let e = shapley_exact(&model.margin_model(), &x[pick], bg, 14).unwrap();
        for (a, b) in t.phis.iter().zip(&e.phis) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        prop_assert!(t.efficiency_gap.abs() < 1e-6);
        prop_assert!(e.efficiency_gap.abs() < 1e-6);
    }

    #[test]
    fn exact_is_efficient(seed in 0u64..1000, m in 1usize..=8) {
        let mut rng = hxai_core::seeded_rng(seed);
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let info = ModelInfo::new("f", Task::Regression, Provenance::Builtin, names(m));
        let f = FnPredictor::new(info, move |r: &[f64]| {
            r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().tanh() + r[0] * r[m - 1]
        });
        let bg: Vec<Vec<f64>> = (0..5).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = shapley_exact(&f, &row, &bg, 14).unwrap();
        let fx = f.predict(&[row])?[0];
        prop_assert!((r.phi0 + r.phis.iter().sum::<f64>() - fx).abs() < 1e-6);
    }
}

fn square(n: usize) -> Dataset {
    let mut rng = hxai_core::seeded_rng(4);
    let rows = (0..n)
        .map(|_| {
            vec![
                Cell::Num(rng.random_range(0.0..10.0)),
                Cell::Num(rng.random_range(0.0..10.0)),
                Cell::Cat(0),
            ]
        })
        .collect();
    Dataset::new(
        vec![FeatureSchema::numeric("x0"), FeatureSchema::numeric("x1"), FeatureSchema::binary("y")],
        rows,
        "y",
    )
    .unwrap()
}

#[test]
fn counterfactual_near_grid_optimum() {
    let data = square(400);
    let info = ModelInfo::new("lin", Task::BinaryClassification, Provenance::Builtin, names(2));
    let f = FnPredictor::new(info, |r: &[f64]| sigmoid(2.0 * r[0] + r[1] - 12.0));
    let row = [2.0, 3.0];
    let r = find_counterfactual(&f, &data, &row, 1, &CounterfactualConfig::default()).unwrap();
    assert!(r.found);
    assert!(f.predict(&[r.x_cf.clone()]).unwrap()[0] >= 0.5);

    let scale: Vec<f64> = ["x0", "x1"]
        .iter()
        .map(|c| hxai_core::stats::mad(&data.column(c).unwrap()))
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..=1000 {
        for j in 0..=1000 {
            let (a, b) = (i as f64 * 0.01, j as f64 * 0.01);
            if 2.0 * a + b - 12.0 >= 0.0 {
                best = best.min((a - row[0]).abs() / scale[0] + (b - row[1]).abs() / scale[1]);
            }
        }
    }
    assert!(r.distance <= best * 1.10, "{} vs grid {best}", r.distance);
}

#[test]
fn counterfactual_local_minimality() {
    let data = square(400);
    let info = ModelInfo::new("nl", Task::BinaryClassification, Provenance::Builtin, names(2));
    let f = FnPredictor::new(info, |r: &[f64]| sigmoid(r[0] * r[1] / 4.0 - 6.0));
    let row = [3.0, 2.0];
    let r = find_counterfactual(&f, &data, &row, 1, &CounterfactualConfig::default()).unwrap();
    assert!(r.found);
    for (j, name) in ["x0", "x1"].iter().enumerate() {
        if !r.changed_features.contains(&name.to_string()) {
            continue;
        }
        let mut shrunk = r.x_cf.clone();
        shrunk[j] = r.x_cf[j] - 0.05 * (r.x_cf[j] - row[j]);
        assert!(f.predict(&[shrunk]).unwrap()[0] < 0.5, "{name} could shrink further");
    }
}

#[test]
fn surrogate_distils_ar_forecaster() {
    let market = default_market();
    let closes: Vec<&[f64]> = market.iter().map(|s| s.close.as_slice()).collect();
    let base = train_forecaster_pooled(&closes, &ForecasterConfig::default()).unwrap();
    // 6 companies × 84 windows ≈ 500 windows
    let sets: Vec<_> = market
        .iter()
        .map(|s| sliding_window(&s.close[..183], 80, 20, &s.company).unwrap())
        .collect();
    assert_eq!(sets.iter().map(|s| s.windows.len()).sum::<usize>(), 504);
    let s = fit_ts_surrogate(&base, &sets, &SurrogateConfig::default()).unwrap();
    assert!(s.fidelity.agreement.smape < 2.0, "{:?}", s.fidelity);
    assert!((s.fidelity.surrogate.mase - s.fidelity.base.mase).abs() <= 1.0, "{:?}", s.fidelity);
}

#[test]
fn surrogate_of_constant_series_is_constant() {
    let series = vec![7.0; 150];
    let base = train_forecaster_pooled(&[&series], &ForecasterConfig::default()).unwrap();
    let sets = vec![sliding_window(&series, 80, 20, "K").unwrap()];
    let s = fit_ts_surrogate(&base, &sets, &SurrogateConfig::default()).unwrap();
    assert!((s.model.margin(&series[..80]) - 7.0).abs() < 1e-9);
}

#[test]
fn stored_models_predict_identically_after_a_json_round_trip() {
    let (model, x) = random_ensemble(5, 21, true);
    let before = model.predict(&x).unwrap();
    let text = serde_json::to_string(&hxai_core::models::StoredModel::TreeEnsemble(model)).unwrap();
    let restored: hxai_core::models::StoredModel = serde_json::from_str(&text).unwrap();
    let hxai_core::models::AnyModel::Tabular(p) = restored.into_model().unwrap() else {
        panic!("tree ensembles are tabular");
    };
    let after = p.predict(&x).unwrap();
    assert!(before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()));
}
