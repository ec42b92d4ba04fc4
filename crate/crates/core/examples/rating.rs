//! Rate two credit models for sex-based disparity and place them between
//! the random and biased reference models.

use std::sync::Arc;

use hxai_core::io::{self, GC_CREDIT, GC_OUTCOME, GC_SEX};
use hxai_core::models::{train_logistic, train_tree_ensemble, LogisticConfig, Predictor, TreeConfig};
use hxai_core::rating::Metric;
use hxai_core::session::{RatingParams, Role, Session, SessionSettings};
use hxai_core::tabular::CausalSpec;

fn main() -> hxai_core::Result<()> {
    let data = io::german_credit_audit_frame(None)?;
    let features: Vec<String> = io::german_credit()?
        .dataset
        .feature_names()
        .into_iter()
        .filter(|f| f != GC_OUTCOME)
        .collect();
    let lr = train_logistic(&data, GC_OUTCOME, Some(&features), &LogisticConfig::default())?;
    let rf = train_tree_ensemble(
        &data,
        GC_OUTCOME,
        Some(&features),
        &TreeConfig {
            n_trees: 200,
            max_depth: 3,
            ..TreeConfig::default()
        },
    )?;
    let models: Vec<(String, Arc<dyn Predictor>)> = vec![("logistic".into(), Arc::new(lr)), ("forest".into(), Arc::new(rf))];
    let spec = CausalSpec::new(GC_CREDIT, GC_OUTCOME, [GC_SEX]);
    let mut session = Session::tabular("rating", Role::Regulatory, data, None, models, Some(spec), &[], SessionSettings::default())?;

    let params = RatingParams {
        protected: Some(GC_SEX.into()),
        ..Default::default()
    };
    let rating = session.run_rde(Metric::Wrs, &params)?.rating;
    println!("WRS by model (higher means more group disparity):");
    for (model, score) in &rating.scores {
        println!("  {model:<16} {score:.2}");
    }
    for (model, v) in &rating.verdicts {
        println!(
            "  {model}: {:?} (distance to biased {:.2}, to random {:.2})",
            v.resemblance, v.distance_to_biased, v.distance_to_random
        );
    }
    Ok(())
}
