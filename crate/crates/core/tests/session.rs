use std::path::Path;
use std::sync::Arc;

use hxai_core::artifact::ArtifactKind;
use hxai_core::baselines::make_biased_baseline;
use hxai_core::error::Error;
use hxai_core::io::{self, GC_AGE_GROUP, GC_CREDIT, GC_DURATION, GC_OUTCOME, GC_SEX};
use hxai_core::models::{train_logistic, LogisticConfig, Predictor, Task};
use hxai_core::rating::{
    resemblance, Adjustment, BaselineScores, Metric, Resemblance, TransformOp, TreatmentDef,
};
use hxai_core::session::{
    route_question, Category, Direction, ExpectedDirection, Hypothesis, HypothesisRequest, Question, RatingParams,
    Request, Role, ScenarioConfig, Session, SessionSettings,
};
use hxai_core::tabular::{partition_by, CausalSpec};
use proptest::prelude::*;
use serde_json::json;

fn credit_spec() -> CausalSpec {
    CausalSpec::new(GC_CREDIT, GC_OUTCOME, [GC_AGE_GROUP, GC_SEX])
}

fn logistic_session(spec: Option<CausalSpec>) -> Session {
    let data = io::german_credit_audit_frame(None).unwrap();
    let features: Vec<String> = io::german_credit()
        .unwrap()
        .dataset
        .feature_names()
        .into_iter()
        .filter(|f| f != GC_OUTCOME)
        .collect();
    let lr = train_logistic(&data, GC_OUTCOME, Some(&features), &LogisticConfig::default()).unwrap();
    let models: Vec<(String, Arc<dyn Predictor>)> = vec![("lr".into(), Arc::new(lr))];
    let protected = vec![GC_SEX.to_string()];
    Session::tabular("t", Role::Regulatory, data, None, models, spec, &protected, SessionSettings::default()).unwrap()
}

fn scale(feature: &str, k: f64) -> TreatmentDef {
    TreatmentDef::InterventionalTransform {
        op: TransformOp::Scale(k),
        feature: Some(feature.into()),
    }
}

#[test]
fn routing_is_total_and_pure() {
    for c in Category::ALL {
        let a = route_question(c);
        assert_eq!(a, route_question(c));
        assert_eq!(a.category, c);
        assert!(!a.methods.is_empty() && !a.hint.is_empty(), "{c}");
    }
    assert_eq!(route_question(Category::GroupDisparity).methods, ["compute_wrs"]);
    assert!(route_question(Category::GroupDisparity).hint.contains("DIE %"));
    let cf = route_question(Category::MinimalChange);
    assert_eq!(cf.methods, ["find_counterfactual"]);
    assert!(cf.hint.contains("SHAP") && cf.hint.contains("PDP"));
    let err = Question::from_json(&json!({ "category": "astrology" })).unwrap_err();
    assert!(matches!(err, Error::UnknownCategory(c) if c == "astrology"));
}

#[test]
fn biased_baseline_against_itself_has_distance_zero() {
    let data = io::german_credit_audit_frame(None).unwrap();
    let base = hxai_core::session::BaselineSettings::seeded(0);
    let biased = make_biased_baseline(&data, &partition_by(&data, GC_SEX).unwrap(), Task::BinaryClassification, &base.biased)
        .unwrap();
    let models: Vec<(String, Arc<dyn Predictor>)> = vec![("self".into(), Arc::new(biased))];
    let mut s = Session::tabular(
        "self",
        Role::Regulatory,
        data,
        None,
        models,
        Some(credit_spec()),
        &[],
        SessionSettings::default(),
    )
    .unwrap();
    let params = RatingParams {
        protected: Some(GC_SEX.into()),
        ..Default::default()
    };
    let r = s.run_rde(Metric::Wrs, &params).unwrap().rating;
    let v = &r.verdicts["self"];
    assert_eq!(v.resemblance, Resemblance::CloserToBiased);
    assert_eq!(v.distance_to_biased, 0.0);
    assert!(r.scores["biased_baseline"] > r.scores["random_baseline"]);
}

#[test]
fn identity_hypothesis_has_no_effect() {
    let s = logistic_session(Some(credit_spec()));
    for feature in [GC_CREDIT, GC_DURATION] {
        let h = Hypothesis {
            treatment: scale(feature, 1.0),
            expected_direction: ExpectedDirection::None,
            adjust: Adjustment::None,
        };
        let o = s.run_hypothesis(None, &h).unwrap();
        assert_eq!(o.ate.ate, 0.0);
        assert_eq!(o.direction, Direction::None);
        assert_eq!(o.matches_expectation, Some(true));
        assert!(o.conclusion.contains("unchanged"), "{}", o.conclusion);
    }
}

#[test]
fn hypothesis_expectation_is_reported() {
    let mut s = logistic_session(Some(credit_spec()));
    let request = HypothesisRequest {
        model: Some("lr".into()),
        hypothesis: Hypothesis {
            treatment: scale(GC_DURATION, 0.5),
            expected_direction: ExpectedDirection::Decrease,
            adjust: Adjustment::None,
        },
    };
    let a = s.hypothesize(request.clone()).unwrap();
    assert_eq!(a.kind, ArtifactKind::Hypothesis);
    let v = &a.values;
    assert_eq!(v["direction"], "increase");
    assert_eq!(v["matches_expectation"], false);
    assert!(v["conclusion"].as_str().unwrap().contains("contradicts"));
    assert!(matches!(&s.history()[0].request, Request::Hypothesis(r) if *r == request));

    let observational = Hypothesis {
        treatment: TreatmentDef::contrast(hxai_core::rating::Level::Value(1.0), hxai_core::rating::Level::Value(0.0)),
        expected_direction: ExpectedDirection::Unspecified,
        adjust: Adjustment::None,
    };
    assert!(s.run_hypothesis(None, &observational).is_err());
}

#[test]
fn report_is_deterministic_and_needs_history() {
    let mut s = logistic_session(Some(credit_spec()));
    assert!(matches!(s.render_report(), Err(Error::EmptySession)));
    s.ask(Question::new(Category::GroupDisparity, json!({ "protected": GC_SEX }))).unwrap();
    let a = s.render_report().unwrap();
    let b = s.render_report().unwrap();
    assert_eq!(a.sections.len(), 1);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_text(), b.to_text());
    assert!(a.to_text().contains("compute_wrs"));
}

#[test]
fn history_is_append_only() {
    let mut s = logistic_session(Some(credit_spec()));
    let first = s.ask(Question::new(Category::GroupDisparity, json!({ "protected": GC_SEX }))).unwrap();
    let bad = [
        Question::new(Category::LocalAttribution, json!({ "instance": 5000 })),
        Question::new(Category::GlobalFeatureEffect, json!({ "feature": "Height" })),
        Question::new(Category::MinimalChange, json!({ "instance": 3, "model": "svm" })),
        Question::new(Category::GroupDisparity, json!({ "metric": "ate" })),
        Question::new(Category::CausalInfluence, json!({ "unknown": 1 })),
    ];
    for q in bad {
        assert!(s.ask(q).is_err());
        assert_eq!(s.history().len(), 1);
    }
    s.ask(Question::new(Category::LocalAttribution, json!({ "instance": 3 }))).unwrap();
    assert_eq!(s.history().len(), 2);
    assert_eq!(s.history()[0].artifact, first);
    assert_eq!(s.history()[1].artifact.kind, ArtifactKind::Shap);
}

#[test]
fn default_spec_is_flagged_on_every_artifact() {
    let mut s = logistic_session(None);
    assert!(s.spec_is_default());
    assert_eq!(s.spec().protected, [GC_SEX]);
    let a = s.ask(Question::new(Category::GroupDisparity, json!({}))).unwrap();
    assert!(a.metadata.warnings.iter().any(|w| w.contains("no causal spec")));
    let b = s.ask(Question::new(Category::GlobalFeatureEffect, json!({ "feature": GC_CREDIT }))).unwrap();
    assert!(b.metadata.warnings.iter().any(|w| w.contains("no causal spec")));
    assert_eq!(b.values["result"]["grid"].as_array().unwrap().len(), 20);
}

#[test]
fn pdp_grid_defaults_to_twenty_points() {
    let mut s = logistic_session(Some(credit_spec()));
    let a = s.ask(Question::new(Category::GlobalFeatureEffect, json!({ "feature": GC_CREDIT }))).unwrap();
    assert_eq!(a.kind, ArtifactKind::Pdp);
    assert_eq!(a.values["result"]["grid"].as_array().unwrap().len(), 20);
    assert_eq!(a.values["model"], "lr");
}

#[test]
fn jack_scenario_answers_four_questions_in_order() {
    let s = ScenarioConfig::bundled("jack").unwrap().run(Path::new(".")).unwrap();
    let report = s.render_report().unwrap();
    let asked: Vec<Category> = report
        .sections
        .iter()
        .map(|sec| match &sec.request {
            Request::Question(q) => q.category,
            Request::Hypothesis(_) => panic!("jack asks no hypotheses"),
        })
        .collect();
    assert_eq!(
        asked,
        [
            Category::BaselineResemblance,
            Category::LocalAttribution,
            Category::MinimalChange,
            Category::MinimalChange
        ]
    );
    assert_eq!(report.sections.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 2, 3, 4]);
    for sec in &report.sections[2..] {
        assert_eq!(sec.artifact.values["result"]["found"], true, "{}", sec.summary);
    }
    assert_eq!(report.sections[2].artifact.values["result"]["changed_features"], json!([GC_DURATION]));
}

#[test]
fn ensemble_shows_more_confounding_than_logistic() {
    let mut s = ScenarioConfig::bundled("james").unwrap().build(Path::new(".")).unwrap();
    let params = RatingParams {
        treatment: Some(TreatmentDef::transform(TransformOp::Scale(0.5))),
        ..Default::default()
    };
    let r = s.run_rde(Metric::Die, &params).unwrap().rating;
    assert!(
        r.scores["random_forest"] > r.scores["logistic_regression"],
        "{:?}",
        r.scores
    );
}

#[test]
fn every_bundled_scenario_parses() {
    for (name, _) in hxai_core::session::BUNDLED_SCENARIOS {
        let c = ScenarioConfig::bundled(name).unwrap();
        assert_eq!(c.name, name);
        assert!(!c.parsed_questions().unwrap().is_empty());
    }
}

#[test]
fn forecasting_wrs_reports_every_model() {
    let mut s = ScenarioConfig::bundled("jane").unwrap().build(Path::new(".")).unwrap();
    let params = RatingParams {
        companies: Some(vec!["GOOG".into(), "META".into()]),
        ..Default::default()
    };
    let r = s.run_rde(Metric::Wrs, &params).unwrap().rating;
    assert_eq!(r.scores.len(), 3);
    assert!(r.verdicts.contains_key("ar5"));
    assert_eq!(r.spec.outcome, "residual");
    assert!(s
        .run_rde(Metric::Wrs, &RatingParams { companies: Some(vec!["ACME".into()]), ..Default::default() })
        .is_err());
}

#[test]
fn forecasting_explanations() {
    let mut s = ScenarioConfig::bundled("jane").unwrap().build(Path::new(".")).unwrap();
    let local = s.ask(Question::new(Category::LocalAttribution, json!({ "company": "META" }))).unwrap();
    assert_eq!(local.kind, ArtifactKind::Shap);
    let phis = local.values["shap"]["phis"].as_array().unwrap();
    assert_eq!(phis.len(), 80);
    let what_if = Question::new(
        Category::InputSensitivity,
        json!({ "treatment": { "mode": "interventional_transform", "op": "shift", "by": -100.0, "feature": "lag_1" } }),
    );
    let a = s.ask(what_if).unwrap();
    assert_eq!(a.kind, ArtifactKind::WhatIf);
    let ate = a.values["rating"]["scores"]["ar5"].as_f64().unwrap();
    assert!(ate < 0.0, "{ate}");
    assert!(s.ask(Question::new(Category::LocalAttribution, json!({ "instance": 1 }))).is_err());
    assert!(s.ask(Question::new(Category::MinimalChange, json!({ "instance": 1 }))).is_err());
}

proptest! {
    #[test]
    fn verdict_is_scale_invariant(
        score in -50.0f64..50.0,
        random in -50.0f64..50.0,
        biased in -50.0f64..50.0,
        k in 0.01f64..100.0,
    ) {
        let a = resemblance(score, &BaselineScores { random, biased }, 0.25);
        let b = resemblance(score * k, &BaselineScores { random: random * k, biased: biased * k }, 0.25);
        let da = a.distance_to_biased.min(a.distance_to_random) - 0.25 * (biased - random).abs();
        let tie = (a.distance_to_biased - a.distance_to_random).abs();
        // floating point can flip verdicts sitting exactly on a boundary
        prop_assume!(da.abs() > 1e-9 && tie > 1e-9);
        prop_assert_eq!(a.resemblance, b.resemblance);
    }
}
