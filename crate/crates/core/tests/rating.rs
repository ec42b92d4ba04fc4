use hxai_core::models::{FnPredictor, ModelInfo, Provenance, Task};
use hxai_core::rating::{
    compute_ate, compute_die, compute_wrs, Adjustment, AteConfig, Level, Subject, TransformOp, TreatmentDef,
    WrsConfig,
};
use hxai_core::stats::{t_critical, welch_t_test};
use hxai_core::synthetic::{self, grouped_outcomes, linear_effect, ols_slope, Assignment};
use hxai_core::tabular::{partition_by, CausalSpec, Cell, Dataset, FeatureSchema, GroupPartition};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn unit_contrast() -> TreatmentDef {
    TreatmentDef::contrast(Level::Value(1.0), Level::Value(0.0))
}

fn spec() -> CausalSpec {
    CausalSpec::new(synthetic::TREATMENT, synthetic::OUTCOME, [synthetic::CONFOUNDER])
}

#[test]
fn welch_against_reference_t_distribution() {
    let mut rng = hxai_core::seeded_rng(42);
    let a: Vec<f64> = (0..50).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let b: Vec<f64> = (0..50).map(|_| 1.0 + rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let r = welch_t_test(&a, &b).unwrap();
    let reference = StudentsT::new(0.0, 1.0, r.dof).unwrap();
    let p_ref = 2.0 * (1.0 - reference.cdf(r.t.abs()));
    assert!((r.pval - p_ref).abs() < 1e-9, "{} vs {p_ref}", r.pval);
    assert!(r.pval < 0.01);
}

#[test]
fn critical_values_match_reference_quantiles() {
    for &dof in &[1.0, 2.5, 7.0, 19.3, 58.0, 200.0] {
        let reference = StudentsT::new(0.0, 1.0, dof).unwrap();
        for &c in &[0.95, 0.75, 0.6] {
            let want = reference.inverse_cdf(1.0 - (1.0 - c) / 2.0);
            assert!((t_critical(c, dof) - want).abs() < 1e-6, "dof {dof} level {c}");
        }
    }
}

#[test]
fn wrs_ground_truths() {
    let cfg = WrsConfig::default();
    let same = grouped_outcomes(&[3.0, 3.0, 3.0], 0.0, 10, 0);
    let p = partition_by(&same, "group").unwrap();
    assert_eq!(compute_wrs(&same.outcome_values(), &p, &cfg).unwrap().psi, 0.0);

    let two = grouped_outcomes(&[0.0, 10.0], 0.1, 30, 1);
    let p = partition_by(&two, "group").unwrap();
    let r = compute_wrs(&two.outcome_values(), &p, &cfg).unwrap();
    assert!((r.psi - 2.4).abs() < 1e-12);
    assert!(r.pairs[0].t.abs() > 300.0);

    let three = grouped_outcomes(&[0.0, 10.0, 20.0], 0.1, 30, 2);
    let p = partition_by(&three, "group").unwrap();
    assert!((compute_wrs(&three.outcome_values(), &p, &cfg).unwrap().psi - 7.2).abs() < 1e-12);
}

#[test]
fn single_group_scores_zero() {
    let schema = vec![FeatureSchema::categorical("g", ["a", "b"]), FeatureSchema::numeric("y")];
    let rows = (0..5).map(|i| vec![Cell::Cat(0), Cell::Num(f64::from(i))]).collect();
    let d = Dataset::new(schema, rows, "y").unwrap();
    let p = partition_by(&d, "g").unwrap();
    assert_eq!(p.groups.len(), 1);
    assert_eq!(compute_wrs(&d.outcome_values(), &p, &WrsConfig::default()).unwrap().psi, 0.0);
}

fn shuffled_partition(p: &GroupPartition, order: &[usize], rename: bool) -> GroupPartition {
    GroupPartition {
        attribute: p.attribute.clone(),
        groups: order
            .iter()
            .map(|&i| {
                let (l, rows) = &p.groups[i];
                (if rename { format!("renamed-{l}") } else { l.clone() }, rows.clone())
            })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wrs_symmetric_and_relabel_invariant(seed in 0u64..1000, means in prop::collection::vec(-2.0f64..2.0, 3)) {
        let d = grouped_outcomes(&means, 1.0, 12, seed);
        let p = partition_by(&d, "group").unwrap();
        let y = d.outcome_values();
        let base = compute_wrs(&y, &p, &WrsConfig::default()).unwrap().psi;
        let rev = shuffled_partition(&p, &[2, 0, 1], false);
        prop_assert_eq!(compute_wrs(&y, &rev, &WrsConfig::default()).unwrap().psi, base);
        let renamed = shuffled_partition(&p, &[1, 2, 0], true);
        prop_assert_eq!(compute_wrs(&y, &renamed, &WrsConfig::default()).unwrap().psi, base);
        prop_assert!(base >= 0.0 && base <= WrsConfig::default().max_score(3));
    }

    #[test]
    fn wrs_monotone_under_separated_group(seed in 0u64..1000, means in prop::collection::vec(-2.0f64..2.0, 2)) {
        let d = grouped_outcomes(&means, 1.0, 12, seed);
        let p = partition_by(&d, "group").unwrap();
        let before = compute_wrs(&d.outcome_values(), &p, &WrsConfig::default()).unwrap().psi;
        let mut with_far = means.clone();
        with_far.push(1e3);
        let d2 = grouped_outcomes(&with_far, 1.0, 12, seed);
        let p2 = partition_by(&d2, "group").unwrap();
        let after = compute_wrs(&d2.outcome_values(), &p2, &WrsConfig::default()).unwrap().psi;
        prop_assert!(after >= before);
    }

    #[test]
    fn identity_intervention_is_zero(scale in 0.1f64..3.0, seed in 0u64..100) {
        let d = linear_effect(60, seed, Assignment::Confounded, 0.1);
        let info = ModelInfo::new("m", Task::Regression, Provenance::Builtin, vec!["T".into(), "Z".into()]);
        let f = FnPredictor::new(info, move |r: &[f64]| scale * r[0] * r[0] - r[1]);
        let def = TreatmentDef::transform(TransformOp::Scale(1.0));
        let r = compute_ate(&d, Subject::Model(&f), &spec(), &def, Adjustment::None, &AteConfig::default()).unwrap();
        prop_assert_eq!(r.ate, 0.0);
    }
}

#[test]
fn gcomp_recovers_unconfounded_effect() {
    let d = linear_effect(2000, 7, Assignment::Independent, 0.1);
    let r = compute_ate(&d, Subject::Observed, &spec(), &unit_contrast(), Adjustment::Gcomp, &AteConfig::default()).unwrap();
    assert!((1.9..=2.1).contains(&r.ate), "{}", r.ate);
    // the unadjusted fit sees Z as noise (sd 3), so its slope wanders by ~0.07
    assert!(r.die_percent.unwrap() < 20.0, "{:?}", r.die_percent);
}

#[test]
fn gcomp_and_die_on_confounded_data() {
    let d = linear_effect(2000, 11, Assignment::Confounded, 0.1);
    let r = compute_die(&d, Subject::Observed, &spec(), &unit_contrast(), Adjustment::Gcomp, &AteConfig::default()).unwrap();
    assert!((1.8..=2.2).contains(&r.ate), "{}", r.ate);
    let oracle_o = ols_slope(&d.column("T").unwrap(), &d.outcome_values());
    assert!((oracle_o - 2.0).abs() > 1.0, "unadjusted slope {oracle_o} should be biased");
    let oracle_die = (oracle_o - 2.0).abs() * 100.0;
    let die = r.die_percent.unwrap();
    assert!((die - oracle_die).abs() <= 0.15 * oracle_die, "{die} vs {oracle_die}");
}

#[test]
fn psm_recovers_binary_effect() {
    let d = linear_effect(2000, 13, Assignment::Binarized, 0.1);
    let def = TreatmentDef::contrast(Level::Label("1".into()), Level::Label("0".into()));
    let r = compute_ate(&d, Subject::Observed, &spec(), &def, Adjustment::Psm, &AteConfig::default()).unwrap();
    assert!(r.ate_observed > 4.0, "naive {}", r.ate_observed);
    assert!((1.7..=2.3).contains(&r.ate), "{}", r.ate);
    assert!(r.diagnostics.matched_pairs.unwrap() > 1500);
}

#[test]
fn die_zero_without_confounders() {
    let d = linear_effect(200, 3, Assignment::Confounded, 0.1);
    let spec = CausalSpec::new("T", "O", Vec::<String>::new());
    let r = compute_die(&d, Subject::Observed, &spec, &unit_contrast(), Adjustment::Gcomp, &AteConfig::default()).unwrap();
    assert_eq!(r.die_percent, Some(0.0));
}

#[test]
fn die_zero_for_constant_outcome() {
    let d = linear_effect(200, 3, Assignment::Confounded, 0.1);
    let info = ModelInfo::new("c", Task::Regression, Provenance::Builtin, vec!["T".into()]);
    let f = FnPredictor::new(info, |_: &[f64]| 0.25);
    let r = compute_die(&d, Subject::Model(&f), &spec(), &unit_contrast(), Adjustment::Gcomp, &AteConfig::default()).unwrap();
    assert!(r.die_percent.unwrap().abs() < 1e-9, "{:?}", r.die_percent);
}
