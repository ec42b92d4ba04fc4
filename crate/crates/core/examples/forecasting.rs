//! Audit stock-price forecasters: fit an AR model on the synthetic market,
//! distil it into an explainable surrogate and rate its robustness to
//! dropped prices.

use std::path::Path;

use hxai_core::explain::{fit_ts_surrogate, SurrogateConfig};
use hxai_core::models::{train_forecaster_pooled, ForecasterConfig};
use hxai_core::session::{summarize, Category, Question, ScenarioConfig};
use hxai_core::timeseries::{default_market, sliding_window};
use serde_json::json;

fn main() -> hxai_core::Result<()> {
    let market = default_market();
    let closes: Vec<&[f64]> = market.iter().map(|s| s.close.as_slice()).collect();
    let base = train_forecaster_pooled(&closes, &ForecasterConfig::default())?;
    let sets = market
        .iter()
        .map(|s| sliding_window(&s.close, 80, 20, &s.company))
        .collect::<hxai_core::Result<Vec<_>>>()?;
    let surrogate = fit_ts_surrogate(&base, &sets, &SurrogateConfig::default())?;
    let f = &surrogate.fidelity;
    println!(
        "surrogate vs base on {} held-out windows: MASE {:.3} vs {:.3}, SMAPE {:.2}% vs {:.2}%",
        f.n_eval, f.surrogate.mase, f.base.mase, f.surrogate.smape, f.base.smape
    );

    let mut session = ScenarioConfig::bundled("amanda")?.build(Path::new("."))?;
    for kind in ["drop_to_zero", "missing_values"] {
        let q = Question::new(Category::GroupPerturbationSensitivity, json!({ "perturbation": kind }));
        println!("{kind}: {}", summarize(&session.ask(q)?));
    }
    Ok(())
}
