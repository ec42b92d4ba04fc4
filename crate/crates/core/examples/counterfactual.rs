//! The smallest change to a rejected applicant that flips the model's
//! decision, first with only the loan duration mutable, then with only the
//! checking account.

use hxai_core::explain::{find_counterfactual, CounterfactualConfig};
use hxai_core::io::{self, GC_CHECKING, GC_DURATION, GC_OUTCOME};
use hxai_core::models::{train_tree_ensemble, Predictor, TreeConfig};

fn main() -> hxai_core::Result<()> {
    let data = io::german_credit()?.dataset;
    let config = TreeConfig {
        n_trees: 200,
        max_depth: 3,
        ..TreeConfig::default()
    };
    let model = train_tree_ensemble(&data, GC_OUTCOME, None, &config)?;
    let x = data.design(&model.info().features)?;
    let scores = model.predict(&x)?;
    let row = (0..x.len()).find(|&i| scores[i] < 0.5).expect("someone is rejected");
    println!("applicant {row}: P(good risk) = {:.3}", scores[row]);

    for mutable in [GC_DURATION, GC_CHECKING] {
        let frozen = data.with_mutability(&[mutable.to_string()]);
        let r = find_counterfactual(&model, &frozen, &x[row], 1, &CounterfactualConfig::default())?;
        if !r.found {
            println!("changing {mutable} alone cannot flip the decision");
            continue;
        }
        let j = r.features.iter().position(|f| f == mutable).expect("feature present");
        println!(
            "{mutable}: {:.1} -> {:.1} gives score {:.3} (distance {:.2})",
            r.x_orig[j], r.x_cf[j], r.score, r.distance
        );
    }
    Ok(())
}
