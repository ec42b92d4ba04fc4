//! Sliding windows, input perturbations, residual outcomes and accuracy
//! metrics for forecasting audits.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate, Weekday};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Forecaster;
use crate::tabular::{Cell, Dataset, FeatureSchema};

pub const DEFAULT_HISTORY: usize = 80;
pub const DEFAULT_HORIZON: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub company: String,
    pub history_len: usize,
    pub horizon: usize,
    pub windows: Vec<Window>,
}

/// Every stride-1 window of `history_len` inputs followed by `horizon`
/// targets.
pub fn sliding_window(series: &[f64], history_len: usize, horizon: usize, company: &str) -> Result<WindowSet> {
    if history_len == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("history and horizon must be positive".into()));
    }
    let span = history_len + horizon;
    if series.len() < span {
        return Err(Error::SeriesTooShort {
            needed: span,
            got: series.len(),
        });
    }
    let windows = (0..=series.len() - span)
        .map(|start| Window {
            start,
            input: series[start..start + history_len].to_vec(),
            target: series[start + history_len..start + span].to_vec(),
        })
        .collect();
    Ok(WindowSet {
        company: company.to_string(),
        history_len,
        horizon,
        windows,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    #[default]
    None,
    DropToZero,
    MissingValues,
}

impl PerturbationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::DropToZero => "drop_to_zero",
            PerturbationKind::MissingValues => "missing_values",
        }
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PerturbationKind::None),
            "drop_to_zero" => Ok(PerturbationKind::DropToZero),
            "missing_values" => Ok(PerturbationKind::MissingValues),
            other => Err(Error::InvalidConfig(format!("unknown perturbation `{other}`"))),
        }
    }
}

/// Positions `i` with `i mod period == offset` are hit. The default
/// `offset = 0` uses 0-based positions; `offset = period - 1` gives the
/// 1-based reading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    #[serde(default = "default_period")]
    pub period: usize,
    #[serde(default)]
    pub offset: usize,
}

fn default_period() -> usize {
    DEFAULT_HISTORY
}

impl Perturbation {
    pub fn new(kind: PerturbationKind) -> Self {
        Perturbation {
            kind,
            period: DEFAULT_HISTORY,
            offset: 0,
        }
    }

    pub fn with_period(mut self, period: usize) -> Self {
        self.period = period;
        self
    }

    pub fn hits(&self, i: usize) -> bool {
        i % self.period == self.offset
    }
}

/// Copy of `series` with every hit position set to 0 or `NaN`.
pub fn perturb(series: &[f64], p: &Perturbation) -> Result<Vec<f64>> {
    if p.period == 0 || p.offset >= p.period {
        return Err(Error::InvalidConfig("perturbation needs period ≥ 1 and offset < period".into()));
    }
    let fill = match p.kind {
        PerturbationKind::None => return Err(Error::NoPerturbation),
        PerturbationKind::DropToZero => 0.0,
        PerturbationKind::MissingValues => f64::NAN,
    };
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, &v)| if p.hits(i) { fill } else { v })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    #[default]
    ZeroFill,
    /// Last observed value; leading gaps take the first observed value.
    CarryForward,
}

pub fn impute(history: &[f64], imputation: Imputation) -> Vec<f64> {
    match imputation {
        Imputation::ZeroFill => history.iter().map(|&v| if v.is_finite() { v } else { 0.0 }).collect(),
        Imputation::CarryForward => {
            let first = history.iter().copied().find(|v| v.is_finite()).unwrap_or(0.0);
            let mut last = first;
            history
                .iter()
                .map(|&v| {
                    if v.is_finite() {
                        last = v;
                    }
                    last
                })
                .collect()
        }
    }
}

/// Max absolute forecast error per window. Inputs are imputed first, so
/// the forecaster never sees a missing value.
pub fn residual_outcomes(model: &dyn Forecaster, windows: &WindowSet, imputation: Imputation) -> Result<Vec<f64>> {
    windows
        .windows
        .iter()
        .map(|w| {
            let pred = model.forecast(&windows.company, &impute(&w.input, imputation), w.target.len())?;
            Ok(pred
                .iter()
                .zip(&w.target)
                .map(|(p, y)| (p - y).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    /// Percent.
    pub smape: f64,
    pub mase: f64,
}

/// SMAPE (0/0 terms count as 0) and MASE scaled by the one-step naive
/// error on `train`.
pub fn forecast_metrics(pred: &[f64], truth: &[f64], train: &[f64]) -> Result<ForecastMetrics> {
    forecast_metrics_scaled(pred, truth, naive_scale(train)?)
}

/// Mean absolute one-step change of `series`.
pub fn naive_scale(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let naive = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (series.len() - 1) as f64;
    if naive == 0.0 {
        return Err(Error::ZeroNaiveError);
    }
    Ok(naive)
}

/// As [`forecast_metrics`] with a precomputed MASE denominator.
pub fn forecast_metrics_scaled(pred: &[f64], truth: &[f64], scale: f64) -> Result<ForecastMetrics> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len().max(1),
            found: pred.len(),
        });
    }
    let n = pred.len() as f64;
    let smape = 100.0
        * pred
            .iter()
            .zip(truth)
            .map(|(p, y)| {
                let d = p.abs() + y.abs();
                if d == 0.0 {
                    0.0
                } else {
                    2.0 * (p - y).abs() / d
                }
            })
            .sum::<f64>()
        / n;
    let mae = pred.iter().zip(truth).map(|(p, y)| (p - y).abs()).sum::<f64>() / n;
    Ok(ForecastMetrics {
        smape,
        mase: mae / scale,
    })
}

/// One company's daily closing prices, ascending by date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub company: String,
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
}

/// Reads `date, close, company` columns (others are ignored). Dates are
/// ISO-8601; each company's rows are sorted by date. Empty or `NaN` closes
/// load as `NaN`.
pub fn load_series_csv<R: Read>(source: R) -> Result<Vec<Series>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{name}`")))
    };
    let (di, ci, ki) = (find("date")?, find("close")?, find("company")?);
    let mut by_company: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io(e.to_string()))?;
        let parse_err = |column: &str, message: String| Error::Parse {
            row,
            column: column.to_string(),
            message,
        };
        let date = NaiveDate::parse_from_str(&record[di], "%Y-%m-%d")
            .map_err(|e| parse_err("date", format!("{e}: `{}`", &record[di])))?;
        let close = match &record[ci] {
            "" | "NaN" | "nan" => f64::NAN,
            s => s.parse::<f64>().map_err(|e| parse_err("close", format!("{e}: `{s}`")))?,
        };
        by_company.entry(record[ki].to_string()).or_default().push((date, close));
    }
    by_company
        .into_iter()
        .map(|(company, mut points)| {
            points.sort_by_key(|p| p.0);
            if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidDataset(format!("{company} has two rows for {}", w[0].0)));
            }
            Ok(Series {
                company,
                dates: points.iter().map(|p| p.0).collect(),
                close: points.iter().map(|p| p.1).collect(),
            })
        })
        .collect()
}

pub fn write_series_csv<W: Write>(series: &[Series], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["date", "close", "company"]).map_err(io)?;
    for s in series {
        for (d, c) in s.dates.iter().zip(&s.close) {
            let close = if c.is_finite() { c.to_string() } else { String::new() };
            w.write_record([d.to_string(), close, s.company.clone()]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Tickers, starting prices and annualised drift/volatility of the bundled
/// synthetic market.
pub const MARKET: [(&str, f64, f64, f64); 6] = [
    ("C", 60.0, 0.05, 0.28),
    ("GOOG", 150.0, 0.12, 0.30),
    ("META", 480.0, 0.18, 0.40),
    ("MRK", 125.0, 0.04, 0.20),
    ("PFE", 28.0, -0.02, 0.22),
    ("WFC", 55.0, 0.06, 0.26),
];

/// Seeded geometric random walks over `days` weekdays starting at `start`.
pub fn synthetic_market(days: usize, start: NaiveDate, seed: u64) -> Vec<Series> {
    let mut dates = Vec::with_capacity(days);
    let mut d = start;
    while dates.len() < days {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    MARKET
        .iter()
        .enumerate()
        .map(|(k, &(ticker, p0, mu, sigma))| {
            let mut rng = crate::seeded_rng(seed.wrapping_add(k as u64));
            let dt = 1.0 / 252.0;
            let mut p = p0;
            let close = (0..days)
                .map(|i| {
                    if i > 0 {
                        let z: f64 = std.sample(&mut rng);
                        p *= ((mu - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
                    }
                    (p * 100.0).round() / 100.0
                })
                .collect();
            Series {
                company: ticker.to_string(),
                dates: dates.clone(),
                close,
            }
        })
        .collect()
}

pub fn default_market() -> Vec<Series> {
    synthetic_market(260, NaiveDate::from_ymd_opt(2023, 3, 23).expect("valid date"), 2024)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditFrameConfig {
    pub history_len: usize,
    pub horizon: usize,
    /// Arms besides the unperturbed one.
    pub perturbations: Vec<Perturbation>,
    pub imputation: Imputation,
}

impl Default for AuditFrameConfig {
    fn default() -> Self {
        AuditFrameConfig {
            history_len: DEFAULT_HISTORY,
            horizon: DEFAULT_HORIZON,
            perturbations: Vec::new(),
            imputation: Imputation::ZeroFill,
        }
    }
}

pub const COMPANY: &str = "company";
pub const PERTURBATION: &str = "perturbation";
pub const WINDOW_START: &str = "window";
pub const RESIDUAL: &str = "residual";

/// One row per (company, arm, window) with the max residual as outcome.
/// Perturbed arms corrupt the inputs only; targets stay the true prices.
pub fn forecast_audit_frame(model: &dyn Forecaster, series: &[Series], config: &AuditFrameConfig) -> Result<Dataset> {
    let mut arms = vec![PerturbationKind::None];
    for p in &config.perturbations {
        if p.kind == PerturbationKind::None {
            return Err(Error::NoPerturbation);
        }
        if arms.contains(&p.kind) {
            return Err(Error::InvalidConfig(format!("perturbation `{}` listed twice", p.kind.as_str())));
        }
        arms.push(p.kind);
    }
    let mut companies: Vec<String> = series.iter().map(|s| s.company.clone()).collect();
    companies.sort();
    companies.dedup();
    if companies.len() != series.len() {
        return Err(Error::InvalidDataset("duplicate company".into()));
    }
    let mut arm_labels: Vec<&str> = arms.iter().map(|k| k.as_str()).collect();
    arm_labels.sort();

    let mut rows = Vec::new();
    for s in series {
        let truth = sliding_window(&s.close, config.history_len, config.horizon, &s.company)?;
        let company = companies.iter().position(|c| *c == s.company).expect("listed") as u32;
        for (arm, kind) in arms.iter().enumerate() {
            let windows = if arm == 0 {
                truth.clone()
            } else {
                let corrupted = perturb(&s.close, &config.perturbations[arm - 1])?;
                let mut w = sliding_window(&corrupted, config.history_len, config.horizon, &s.company)?;
                for (a, b) in w.windows.iter_mut().zip(&truth.windows) {
                    a.target.clone_from(&b.target);
                }
                w
            };
            let residuals = residual_outcomes(model, &windows, config.imputation)?;
            let arm_code = arm_labels.iter().position(|l| *l == kind.as_str()).expect("listed") as u32;
            for (w, r) in windows.windows.iter().zip(residuals) {
                rows.push(vec![Cell::Cat(company), Cell::Cat(arm_code), Cell::Num(w.start as f64), Cell::Num(r)]);
            }
        }
    }
    let company_schema = if companies.len() >= 2 {
        FeatureSchema::categorical(COMPANY, companies)
    } else {
        let mut labels = companies;
        labels.push("(other)".into());
        FeatureSchema::categorical(COMPANY, labels)
    };
    let arm_schema = if arm_labels.len() >= 2 {
        FeatureSchema::categorical(PERTURBATION, arm_labels)
    } else {
        FeatureSchema::categorical(PERTURBATION, ["none", "(other)"])
    };
    Dataset::new(
        vec![
            company_schema.immutable(),
            arm_schema,
            FeatureSchema::numeric(WINDOW_START).immutable(),
            FeatureSchema::numeric(RESIDUAL),
        ],
        rows,
        RESIDUAL,
    )
}

/// Frame restricted to one perturbation arm.
pub fn arm(frame: &Dataset, kind: PerturbationKind) -> Result<Dataset> {
    let c = frame.column_index(PERTURBATION)?;
    let rows: Vec<usize> = (0..frame.n_rows())
        .filter(|&i| frame.label(i, c) == Some(kind.as_str()))
        .collect();
    frame.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelInfo, Provenance, Task};

    #[derive(Debug)]
    struct Constant(ModelInfo, f64);

    impl Forecaster for Constant {
        fn info(&self) -> &ModelInfo {
            &self.0
        }
        fn forecast(&self, _: &str, _: &[f64], h: usize) -> Result<Vec<f64>> {
            Ok(vec![self.1; h])
        }
    }

    fn constant(v: f64) -> Constant {
        Constant(ModelInfo::new("c", Task::Forecasting, Provenance::Builtin, vec![]), v)
    }

    #[test]
    fn window_counts() {
        let s: Vec<f64> = (0..105).map(f64::from).collect();
        assert_eq!(sliding_window(&s[..100], 80, 20, "A").unwrap().windows.len(), 1);
        let w = sliding_window(&s, 80, 20, "A").unwrap();
        assert_eq!(w.windows.iter().map(|w| w.start).collect::<Vec<_>>(), [0, 1, 2, 3, 4, 5]);
        assert_eq!(w.windows[5].target[19], 104.0);
        assert_eq!(
            sliding_window(&s[..99], 80, 20, "A").unwrap_err(),
            Error::SeriesTooShort { needed: 100, got: 99 }
        );
    }

    #[test]
    fn perturbation_positions() {
        let s = vec![1.0; 161];
        let z = perturb(&s, &Perturbation::new(PerturbationKind::DropToZero)).unwrap();
        let zeros: Vec<usize> = (0..161).filter(|&i| z[i] == 0.0).collect();
        assert_eq!(zeros, [0, 80, 160]);
        let m = perturb(&s, &Perturbation::new(PerturbationKind::MissingValues)).unwrap();
        assert_eq!(m.iter().filter(|v| v.is_nan()).count(), 161usize.div_ceil(80));
        assert_eq!(
            perturb(&s, &Perturbation::new(PerturbationKind::None)).unwrap_err(),
            Error::NoPerturbation
        );
        let one_based = Perturbation {
            kind: PerturbationKind::DropToZero,
            period: 80,
            offset: 79,
        };
        let z = perturb(&s, &one_based).unwrap();
        assert_eq!((0..161).filter(|&i| z[i] == 0.0).collect::<Vec<_>>(), [79, 159]);
    }

    #[test]
    fn constant_model_on_ramp() {
        let mut s = vec![0.0; 80];
        s.extend((1..=20).map(f64::from));
        let w = sliding_window(&s, 80, 20, "A").unwrap();
        assert_eq!(residual_outcomes(&constant(5.0), &w, Imputation::ZeroFill).unwrap(), [15.0]);
    }

    #[test]
    fn imputation() {
        let h = [f64::NAN, 2.0, f64::NAN, 4.0];
        assert_eq!(impute(&h, Imputation::ZeroFill), [0.0, 2.0, 0.0, 4.0]);
        assert_eq!(impute(&h, Imputation::CarryForward), [2.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn metrics() {
        let truth = [1.0, 2.0, 3.0];
        let m = forecast_metrics(&truth, &truth, &[0.0, 2.0]).unwrap();
        assert_eq!((m.smape, m.mase), (0.0, 0.0));
        let pred = [2.0, 3.0, 4.0];
        assert_eq!(forecast_metrics(&pred, &truth, &[0.0, 2.0, 0.0]).unwrap().mase, 0.5);
        assert_eq!(forecast_metrics(&[0.0], &[0.0], &[1.0, 3.0]).unwrap().smape, 0.0);
        assert_eq!(forecast_metrics(&pred, &truth, &[1.0, 1.0]).unwrap_err(), Error::ZeroNaiveError);
    }

    #[test]
    fn csv_round_trip_sorts_dates() {
        let text = "date,close,company,volume\n2024-01-03,11.5,B,1\n2024-01-02,10,B,1\n2024-01-02,,A,2\n";
        let s = load_series_csv(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].company, "A");
        assert!(s[0].close[0].is_nan());
        assert_eq!(s[1].close, [10.0, 11.5]);
        let mut out = Vec::new();
        write_series_csv(&s, &mut out).unwrap();
        let again = load_series_csv(out.as_slice()).unwrap();
        assert_eq!(again[1], s[1]);
        assert!(matches!(
            load_series_csv("date,close,company\n2024-13-01,1,A\n".as_bytes()).unwrap_err(),
            Error::Parse { row: 0, .. }
        ));
    }

    #[test]
    fn market_is_seeded_and_weekday_only() {
        let a = default_market();
        assert_eq!(a, default_market());
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|s| s.close.len() == 260 && s.close.iter().all(|v| *v > 0.0)));
        assert!(a[0].dates.iter().all(|d| d.weekday().number_from_monday() <= 5));
    }

    #[test]
    fn audit_frame_layout() {
        let market = synthetic_market(110, NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), 1);
        let cfg = AuditFrameConfig {
            perturbations: vec![Perturbation::new(PerturbationKind::DropToZero)],
            ..AuditFrameConfig::default()
        };
        let f = forecast_audit_frame(&constant(0.0), &market, &cfg).unwrap();
        assert_eq!(f.n_rows(), 6 * 2 * 11);
        assert_eq!(f.feature(PERTURBATION).unwrap().categories, ["drop_to_zero", "none"]);
        assert_eq!(arm(&f, PerturbationKind::None).unwrap().n_rows(), 66);
        // a constant forecast ignores its inputs, so both arms agree
        let none = arm(&f, PerturbationKind::None).unwrap().outcome_values();
        let zero = arm(&f, PerturbationKind::DropToZero).unwrap().outcome_values();
        assert_eq!(none, zero);
    }
}
