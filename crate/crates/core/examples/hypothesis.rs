//! Test stakeholder hypotheses of the form "doubling X raises the risk
//! score" against a trained model.

use std::path::Path;

use hxai_core::io::{GC_AGE, GC_CREDIT, GC_DURATION};
use hxai_core::rating::{Adjustment, TransformOp, TreatmentDef};
use hxai_core::session::{ExpectedDirection, Hypothesis, ScenarioConfig};

fn main() -> hxai_core::Result<()> {
    let session = ScenarioConfig::bundled("james")?.build(Path::new("."))?;
    let claims = [
        (GC_CREDIT, 0.5, ExpectedDirection::Increase),
        (GC_DURATION, 0.5, ExpectedDirection::Increase),
        (GC_AGE, 2.0, ExpectedDirection::Decrease),
    ];
    for (feature, k, expected) in claims {
        let h = Hypothesis {
            treatment: TreatmentDef::InterventionalTransform {
                op: TransformOp::Scale(k),
                feature: Some(feature.into()),
            },
            expected_direction: expected,
            adjust: Adjustment::None,
        };
        for model in ["random_forest", "logistic_regression"] {
            let o = session.run_hypothesis(Some(model), &h)?;
            println!("{model:<20} {}", o.conclusion);
        }
    }
    Ok(())
}
