use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::psm::{fit_propensity_and_match, PsmConfig};
use super::superlearner::{fit_super_learner, SuperLearnerConfig};
use super::{Adjustment, AteDiagnostics, AteResult, Level, TransformOp, TreatmentDef};
use crate::error::{Error, Result};
use crate::models::{predict_dataset, Predictor};
use crate::stats::mean;
use crate::tabular::{apply_transform, CausalSpec, Cell, Dataset, FeatureSchema, OutcomeTransform};

/// Whose outcome is being rated.
#[derive(Clone, Copy, Debug)]
pub enum Subject<'a> {
    /// Predictions of a model (after the spec's outcome transform).
    Model(&'a dyn Predictor),
    /// The dataset's own outcome column, e.g. residuals already computed
    /// by the time-series harness.
    Observed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AteConfig {
    #[serde(default)]
    pub psm: PsmConfig,
    #[serde(default)]
    pub learner: SuperLearnerConfig,
}

fn subject_outcomes(data: &Dataset, subject: Subject<'_>, spec: &CausalSpec) -> Result<Vec<f64>> {
    match subject {
        Subject::Observed => data.column(&spec.outcome),
        Subject::Model(m) => score(m, data, spec),
    }
}

fn score(model: &dyn Predictor, data: &Dataset, spec: &CausalSpec) -> Result<Vec<f64>> {
    let preds = predict_dataset(model, data)?;
    match spec.outcome_transform {
        OutcomeTransform::Identity => Ok(preds),
        t => apply_transform(&preds, Some(&data.column(&spec.outcome)?), t, None),
    }
}

/// Copy of `data` with `op` applied to the numeric column `c`.
fn intervene(data: &Dataset, c: usize, op: TransformOp) -> Result<Dataset> {
    let rows = data
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r[c] = match r[c] {
                Cell::Num(v) => Cell::Num(op.apply(v)),
                Cell::Missing => Cell::Missing,
                Cell::Cat(_) => unreachable!("numeric column checked"),
            };
            r
        })
        .collect();
    Dataset::new(data.schema().to_vec(), rows, data.outcome_name())
}

/// Encoded design for the outcome model: treatment first, then confounders.
struct Design {
    x: Vec<Vec<f64>>,
    categorical: Vec<bool>,
}

fn design(data: &Dataset, rows: &[usize], treatment: &[f64], treatment_categorical: bool, z: &[String]) -> Result<Design> {
    let zcols: Vec<usize> = z.iter().map(|n| data.column_index(n)).collect::<Result<_>>()?;
    let mut categorical = vec![treatment_categorical];
    categorical.extend(zcols.iter().map(|&c| !data.schema()[c].is_numeric()));
    let x = rows
        .iter()
        .zip(treatment)
        .map(|(&r, &t)| {
            let mut row = vec![t];
            row.extend(zcols.iter().map(|&c| data.cell(r, c).encode()));
            row
        })
        .collect();
    Ok(Design { x, categorical })
}

fn with_treatment(d: &Design, t: &[f64]) -> Vec<Vec<f64>> {
    d.x.iter()
        .zip(t)
        .map(|(r, &v)| {
            let mut r = r.clone();
            r[0] = v;
            r
        })
        .collect()
}

/// Standardisation estimate `mean_i [ô(t1_i, Z_i) − ô(t0_i, Z_i)]` with `ô`
/// a super learner of `o` on `(t, Z)`.
#[allow(clippy::too_many_arguments)]
fn standardise(
    data: &Dataset,
    rows: &[usize],
    t: &[f64],
    t_categorical: bool,
    o: &[f64],
    z: &[String],
    t1: &[f64],
    t0: &[f64],
    learner: &SuperLearnerConfig,
) -> Result<(f64, BTreeMap<String, f64>)> {
    let d = design(data, rows, t, t_categorical, z)?;
    let sl = fit_super_learner(&d.x, o, &d.categorical, learner)?;
    let p1 = sl.predict(&with_treatment(&d, t1))?;
    let p0 = sl.predict(&with_treatment(&d, t0))?;
    let diffs: Vec<f64> = p1.iter().zip(&p0).map(|(a, b)| a - b).collect();
    let weights = sl.weights().into_iter().map(|(n, w)| (n.to_string(), w)).collect();
    Ok((mean(&diffs), weights))
}

/// G-computation of the effect named by `def` with the spec's protected
/// attributes as confounders.
pub fn g_compute_ate(
    data: &Dataset,
    subject: Subject<'_>,
    spec: &CausalSpec,
    def: &TreatmentDef,
    learner: &SuperLearnerConfig,
) -> Result<f64> {
    let config = AteConfig {
        learner: learner.clone(),
        ..AteConfig::default()
    };
    Ok(compute_ate(data, subject, spec, def, Adjustment::Gcomp, &config)?.ate)
}

fn resolve_level(feature: &FeatureSchema, level: &Level) -> Result<f64> {
    if feature.is_numeric() {
        return match level {
            Level::Value(v) => Ok(*v),
            Level::Label(s) => s
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("`{s}` is not a value of numeric `{}`", feature.name))),
        };
    }
    let label = match level {
        Level::Label(s) => s.clone(),
        Level::Value(v) => format!("{v}"),
    };
    feature
        .category_index(&label)
        .map(|i| i as f64)
        .ok_or_else(|| Error::InvalidConfig(format!("`{label}` is not a category of `{}`", feature.name)))
}

fn finish(ate: f64, observed: f64, adjusted: Option<f64>, method: Adjustment, mut diagnostics: AteDiagnostics) -> AteResult {
    let die_percent = adjusted.map(|g| (observed.abs() - g.abs()).abs() * 100.0);
    diagnostics.die_signed = adjusted.map(|g| (g - observed) * 100.0);
    AteResult {
        ate,
        abs_ate: ate.abs(),
        ate_observed: observed,
        ate_deconfounded: adjusted,
        die_percent,
        method,
        diagnostics,
    }
}

/// Average treatment effect of `def` on the subject's outcome.
///
/// Interventional transforms are evaluated by direct intervention on the
/// model when `adjust` is `none`; with `gcomp` the effect is estimated from
/// `(T, Z, O)` by G-computation, and the unadjusted counterpart is the same
/// estimator without `Z`. Observational contrasts compare rows at the two
/// levels: difference in means unadjusted (or G-computation on `T` alone
/// for numeric treatments), propensity matching or G-computation adjusted.
pub fn compute_ate(
    data: &Dataset,
    subject: Subject<'_>,
    spec: &CausalSpec,
    def: &TreatmentDef,
    adjust: Adjustment,
    config: &AteConfig,
) -> Result<AteResult> {
    spec.validate(data)?;
    let outcomes = subject_outcomes(data, subject, spec)?;
    match def {
        TreatmentDef::InterventionalTransform { op, feature } => {
            interventional(data, subject, spec, &outcomes, *op, feature.as_deref(), adjust, config)
        }
        TreatmentDef::ObservationalContrast { p, p0 } => contrast(data, spec, &outcomes, p, p0, adjust, config),
    }
}

/// Deconfounded impact: [`compute_ate`] with a mandatory adjustment.
pub fn compute_die(
    data: &Dataset,
    subject: Subject<'_>,
    spec: &CausalSpec,
    def: &TreatmentDef,
    adjust: Adjustment,
    config: &AteConfig,
) -> Result<AteResult> {
    if adjust == Adjustment::None {
        return Err(Error::UnsupportedAdjustment("DIE needs psm or gcomp".into()));
    }
    compute_ate(data, subject, spec, def, adjust, config)
}

#[allow(clippy::too_many_arguments)]
fn interventional(
    data: &Dataset,
    subject: Subject<'_>,
    spec: &CausalSpec,
    outcomes: &[f64],
    op: TransformOp,
    feature: Option<&str>,
    adjust: Adjustment,
    config: &AteConfig,
) -> Result<AteResult> {
    let name = feature.unwrap_or(&spec.treatment);
    let c = data.column_index(name)?;
    if !data.schema()[c].is_numeric() {
        return Err(Error::InvalidCausalSpec(format!("transform target `{name}` is not numeric")));
    }
    if let TransformOp::Scale(k) = op {
        if !(k > 0.0) {
            return Err(Error::InvalidConfig("scale factor must be positive".into()));
        }
    }
    let n = data.n_rows();
    let mut diag = AteDiagnostics {
        n_treated: n,
        n_control: n,
        ..AteDiagnostics::default()
    };
    let direct = match subject {
        Subject::Model(m) => {
            let treated = score(m, &intervene(data, c, op)?, spec)?;
            let diffs: Vec<f64> = treated.iter().zip(outcomes).map(|(a, b)| a - b).collect();
            Some(mean(&diffs))
        }
        Subject::Observed => None,
    };
    if adjust == Adjustment::Psm {
        return Err(Error::UnsupportedAdjustment(
            "propensity matching needs a binary treatment contrast".into(),
        ));
    }

    let t_all = data.column(name)?;
    let rows: Vec<usize> = (0..n).filter(|&i| t_all[i].is_finite() && outcomes[i].is_finite()).collect();
    let t: Vec<f64> = rows.iter().map(|&i| t_all[i]).collect();
    let o: Vec<f64> = rows.iter().map(|&i| outcomes[i]).collect();
    let t1: Vec<f64> = t.iter().map(|&v| op.apply(v)).collect();
    let z: Vec<String> = spec.confounders().into_iter().filter(|z| z != name).collect();

    match (adjust, direct) {
        (Adjustment::None, Some(d)) => Ok(finish(d, d, None, adjust, diag)),
        (Adjustment::None, None) => {
            let (o_hat, w) = standardise(data, &rows, &t, false, &o, &[], &t1, &t, &config.learner)?;
            diag.ensemble_weights = Some(w);
            Ok(finish(o_hat, o_hat, None, adjust, diag))
        }
        (_, direct) => {
            let (observed, _) = standardise(data, &rows, &t, false, &o, &[], &t1, &t, &config.learner)?;
            let (adjusted, w) = standardise(data, &rows, &t, false, &o, &z, &t1, &t, &config.learner)?;
            diag.ensemble_weights = Some(w);
            diag.direct_effect = direct;
            Ok(finish(adjusted, observed, Some(adjusted), adjust, diag))
        }
    }
}

fn contrast(
    data: &Dataset,
    spec: &CausalSpec,
    outcomes: &[f64],
    p: &Level,
    p0: &Level,
    adjust: Adjustment,
    config: &AteConfig,
) -> Result<AteResult> {
    let feature = data.feature(&spec.treatment)?;
    let vp = resolve_level(feature, p)?;
    let vp0 = resolve_level(feature, p0)?;
    let t_all = data.column(&spec.treatment)?;
    let z = spec.confounders();
    let mut diag = AteDiagnostics::default();

    if feature.is_numeric() {
        if adjust == Adjustment::Psm {
            return Err(Error::UnsupportedAdjustment(
                "propensity matching needs a binary treatment; binarize it first".into(),
            ));
        }
        let rows: Vec<usize> = (0..data.n_rows())
            .filter(|&i| t_all[i].is_finite() && outcomes[i].is_finite())
            .collect();
        let t: Vec<f64> = rows.iter().map(|&i| t_all[i]).collect();
        let o: Vec<f64> = rows.iter().map(|&i| outcomes[i]).collect();
        diag.n_treated = rows.len();
        diag.n_control = rows.len();
        if t.iter().all(|v| *v == t[0]) {
            diag.warnings.push("uniform treatment: no contrast is identifiable".into());
            let adjusted = (adjust != Adjustment::None).then_some(0.0);
            return Ok(finish(0.0, 0.0, adjusted, adjust, diag));
        }
        let t1 = vec![vp; t.len()];
        let t0 = vec![vp0; t.len()];
        let (observed, w0) = standardise(data, &rows, &t, false, &o, &[], &t1, &t0, &config.learner)?;
        if adjust == Adjustment::None {
            diag.ensemble_weights = Some(w0);
            return Ok(finish(observed, observed, None, adjust, diag));
        }
        let (adjusted, w) = standardise(data, &rows, &t, false, &o, &z, &t1, &t0, &config.learner)?;
        diag.ensemble_weights = Some(w);
        return Ok(finish(adjusted, observed, Some(adjusted), adjust, diag));
    }

    // categorical treatment: keep rows at either level
    let treated: Vec<usize> = (0..data.n_rows())
        .filter(|&i| t_all[i] == vp && outcomes[i].is_finite())
        .collect();
    let control: Vec<usize> = (0..data.n_rows())
        .filter(|&i| t_all[i] == vp0 && outcomes[i].is_finite())
        .collect();
    if treated.is_empty() {
        return Err(Error::EmptyTreatedArm);
    }
    if control.is_empty() {
        return Err(Error::EmptyControlArm);
    }
    diag.n_treated = treated.len();
    diag.n_control = control.len();
    let mo = |rows: &[usize]| mean(&rows.iter().map(|&i| outcomes[i]).collect::<Vec<_>>());
    let observed = mo(&treated) - mo(&control);

    match adjust {
        Adjustment::None => Ok(finish(observed, observed, None, adjust, diag)),
        Adjustment::Psm => {
            let mut rows: Vec<usize> = treated.iter().chain(&control).copied().collect();
            rows.sort_unstable();
            let sub = data.select_rows(&rows)?;
            let flag: Vec<bool> = rows.iter().map(|&i| t_all[i] == vp).collect();
            let o: Vec<f64> = rows.iter().map(|&i| outcomes[i]).collect();
            let forward = fit_propensity_and_match(&sub, &flag, &z, &config.psm);
            let inverted: Vec<bool> = flag.iter().map(|f| !f).collect();
            let backward = fit_propensity_and_match(&sub, &inverted, &z, &config.psm);
            let (forward, backward) = match (forward, backward) {
                (Err(e), Err(_)) => return Err(e),
                (f, b) => (f.ok(), b.ok()),
            };
            // effect on the treated from treated→control pairs, on the
            // controls from control→treated pairs, weighted by pair counts
            let mut sum = 0.0;
            let mut count = 0usize;
            if let Some(m) = &forward {
                sum += m.pairs.iter().map(|&(t, c)| o[t] - o[c]).sum::<f64>();
                count += m.pairs.len();
                diag.unmatched_treated = Some(m.unmatched_treated.len());
                diag.caliper = Some(m.caliper);
            }
            if let Some(m) = &backward {
                sum += m.pairs.iter().map(|&(c, t)| o[t] - o[c]).sum::<f64>();
                count += m.pairs.len();
                diag.unmatched_control = Some(m.unmatched_treated.len());
                diag.caliper.get_or_insert(m.caliper);
            }
            diag.matched_pairs = Some(count);
            let adjusted = sum / count as f64;
            Ok(finish(adjusted, observed, Some(adjusted), adjust, diag))
        }
        Adjustment::Gcomp => {
            let mut rows: Vec<usize> = treated.iter().chain(&control).copied().collect();
            rows.sort_unstable();
            let ind: Vec<f64> = rows.iter().map(|&i| f64::from(u8::from(t_all[i] == vp))).collect();
            let o: Vec<f64> = rows.iter().map(|&i| outcomes[i]).collect();
            let ones = vec![1.0; rows.len()];
            let zeros = vec![0.0; rows.len()];
            let (adjusted, w) = standardise(data, &rows, &ind, false, &o, &z, &ones, &zeros, &config.learner)?;
            diag.ensemble_weights = Some(w);
            Ok(finish(adjusted, observed, Some(adjusted), adjust, diag))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FnPredictor, ModelInfo, Provenance, Task};

    fn credit_frame() -> Dataset {
        let schema = vec![
            FeatureSchema::numeric("credit"),
            FeatureSchema::categorical("sex", ["f", "m"]),
            FeatureSchema::binary("risk"),
        ];
        let rows = (0..40)
            .map(|i| vec![Cell::Num(10_000.0), Cell::Cat(i % 2), Cell::Cat((i / 2) % 2)])
            .collect();
        Dataset::new(schema, rows, "risk").unwrap()
    }

    fn info() -> ModelInfo {
        ModelInfo::new("f", Task::Regression, Provenance::Builtin, vec!["credit".into(), "sex".into()])
    }

    #[test]
    fn linear_model_halving_credit() {
        let d = credit_frame();
        let f = FnPredictor::new(info(), |r: &[f64]| 0.1 * r[0] / 1000.0);
        let spec = CausalSpec::new("credit", "risk", ["sex"]);
        let def = TreatmentDef::transform(TransformOp::Scale(0.5));
        let r = compute_ate(&d, Subject::Model(&f), &spec, &def, Adjustment::None, &AteConfig::default()).unwrap();
        assert!((r.ate + 0.5).abs() < 1e-12, "{}", r.ate);
    }

    #[test]
    fn constant_model_and_identity_intervention() {
        let d = credit_frame();
        let f = FnPredictor::new(info(), |r: &[f64]| r[0] * 1e-4 + r[1]);
        let spec = CausalSpec::new("credit", "risk", ["sex"]);
        let id = TreatmentDef::transform(TransformOp::Scale(1.0));
        let r = compute_ate(&d, Subject::Model(&f), &spec, &id, Adjustment::None, &AteConfig::default()).unwrap();
        assert_eq!(r.ate, 0.0);
        let c = FnPredictor::new(info(), |_: &[f64]| 0.3);
        let half = TreatmentDef::transform(TransformOp::Scale(0.5));
        let r = compute_ate(&d, Subject::Model(&c), &spec, &half, Adjustment::None, &AteConfig::default()).unwrap();
        assert_eq!(r.ate, 0.0);
    }

    #[test]
    fn contrast_sign_flip_and_arms() {
        let d = credit_frame();
        let f = FnPredictor::new(info(), |r: &[f64]| 0.2 + 0.5 * r[1]);
        let mut spec = CausalSpec::new("sex", "risk", Vec::<String>::new());
        spec.protected.clear();
        let m = Level::Label("m".into());
        let fm = Level::Label("f".into());
        let a = compute_ate(&d, Subject::Model(&f), &spec, &TreatmentDef::contrast(m.clone(), fm.clone()), Adjustment::None, &AteConfig::default()).unwrap();
        let b = compute_ate(&d, Subject::Model(&f), &spec, &TreatmentDef::contrast(fm, m.clone()), Adjustment::None, &AteConfig::default()).unwrap();
        assert!((a.ate_observed - 0.5).abs() < 1e-12);
        assert_eq!(a.ate_observed, -b.ate_observed);
        let one = d.select_rows(&[0, 2, 4]).unwrap();
        assert_eq!(
            compute_ate(&one, Subject::Model(&f), &spec, &TreatmentDef::contrast(m, Level::Label("f".into())), Adjustment::None, &AteConfig::default()).unwrap_err(),
            Error::EmptyTreatedArm
        );
    }

    #[test]
    fn psm_rejects_continuous_treatment() {
        let d = credit_frame();
        let f = FnPredictor::new(info(), |_: &[f64]| 0.3);
        let spec = CausalSpec::new("credit", "risk", ["sex"]);
        let def = TreatmentDef::transform(TransformOp::Scale(0.5));
        assert!(matches!(
            compute_ate(&d, Subject::Model(&f), &spec, &def, Adjustment::Psm, &AteConfig::default()),
            Err(Error::UnsupportedAdjustment(_))
        ));
    }

    #[test]
    fn uniform_numeric_treatment_warns() {
        let d = credit_frame();
        let spec = CausalSpec::new("credit", "risk", ["sex"]);
        let def = TreatmentDef::contrast(Level::Value(1.0), Level::Value(0.0));
        let r = compute_ate(&d, Subject::Observed, &spec, &def, Adjustment::Gcomp, &AteConfig::default()).unwrap();
        assert_eq!(r.ate, 0.0);
        assert_eq!(r.die_percent, Some(0.0));
        assert!(!r.diagnostics.warnings.is_empty());
    }
}
