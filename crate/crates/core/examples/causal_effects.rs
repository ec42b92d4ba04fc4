//! Recover a known treatment effect from confounded synthetic data and
//! measure how much confounding distorts the naive estimate.

use hxai_core::rating::{compute_ate, compute_die, Adjustment, AteConfig, Level, Subject, TreatmentDef};
use hxai_core::synthetic::{self, linear_effect, Assignment};
use hxai_core::tabular::CausalSpec;

fn main() -> hxai_core::Result<()> {
    // O = 2T + 3Z + noise, with T = Z + noise: the true effect is 2.
    let data = linear_effect(2000, 11, Assignment::Confounded, 0.1);
    let spec = CausalSpec::new(synthetic::TREATMENT, synthetic::OUTCOME, [synthetic::CONFOUNDER]);
    let unit = TreatmentDef::contrast(Level::Value(1.0), Level::Value(0.0));
    let cfg = AteConfig::default();

    let naive = compute_ate(&data, Subject::Observed, &spec, &unit, Adjustment::None, &cfg)?;
    let die = compute_die(&data, Subject::Observed, &spec, &unit, Adjustment::Gcomp, &cfg)?;
    println!("naive ATE        {:.3}", naive.ate);
    println!("g-computed ATE   {:.3}", die.ate);
    println!("DIE %            {:.1}", die.die_percent.unwrap_or(f64::NAN));

    let binary = linear_effect(2000, 13, Assignment::Binarized, 0.1);
    let treated = TreatmentDef::contrast(Level::Label("1".into()), Level::Label("0".into()));
    let psm = compute_ate(&binary, Subject::Observed, &spec, &treated, Adjustment::Psm, &cfg)?;
    println!(
        "PSM ATE          {:.3} ({} matched pairs; naive {:.3})",
        psm.ate,
        psm.diagnostics.matched_pairs.unwrap_or(0),
        psm.ate_observed
    );
    Ok(())
}
