//! Local and global SHAP attributions for a tree ensemble on German Credit.

use hxai_core::explain::{global_shap, tree_shap, ShapConfig};
use hxai_core::io::{self, GC_OUTCOME};
use hxai_core::models::{train_tree_ensemble, TreeConfig};

fn main() -> hxai_core::Result<()> {
    let data = io::german_credit()?.dataset;
    let config = TreeConfig {
        n_trees: 200,
        max_depth: 3,
        ..TreeConfig::default()
    };
    let model = train_tree_ensemble(&data, GC_OUTCOME, None, &config)?;
    let x = data.design(&model.info().features)?;

    let row = 14;
    let local = tree_shap(&model, &x[row], &x[..100])?;
    println!("applicant {row}: base {:.3}, output {:.3} (margin scale)", local.phi0, local.fx);
    let mut ranked: Vec<(&String, &f64)> = local.features.iter().zip(&local.phis).collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    for (f, phi) in ranked.iter().take(5) {
        println!("  {phi:+.3}  {f}");
    }

    let global = global_shap(&model, &data, 200, &ShapConfig::default())?;
    let mut ranked: Vec<(&String, &f64)> = global.features.iter().zip(&global.mean_abs).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(a.1));
    println!("mean |SHAP| over {} rows:", global.n_rows);
    for (f, v) in ranked.iter().take(5) {
        println!("  {v:.3}  {f}");
    }
    Ok(())
}
