//! Partial dependence of a logistic credit model on loan duration and on
//! checking-account status, written as SVG line charts.

use hxai_core::explain::compute_pdp;
use hxai_core::io::{self, GC_CHECKING, GC_DURATION, GC_OUTCOME};
use hxai_core::models::{train_logistic, LogisticConfig};

fn main() -> hxai_core::Result<()> {
    let data = io::german_credit()?.dataset;
    let model = train_logistic(&data, GC_OUTCOME, None, &LogisticConfig::default())?;
    for feature in [GC_DURATION, GC_CHECKING] {
        let curve = compute_pdp(&model, &data, feature, 20)?;
        println!("{feature} ({} grid points):", curve.grid.len());
        for (i, (g, avg)) in curve.grid.iter().zip(&curve.averages).enumerate() {
            let label = curve.labels.as_ref().map_or_else(|| format!("{g}"), |l| l[i].clone());
            println!("  {label:<40} {avg:.3}");
        }
    }
    Ok(())
}
