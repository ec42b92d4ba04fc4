//! Command-line front end. Exit codes: 0 success, 1 engine or data error
//! (reported as JSON on stderr), 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{AppError, AppResult};
use crate::workspace::{
    AuditRows, DatasetRecord, DatasetRequest, DatasetUpload, ModelRequest, SessionRequest, Workspace,
};
use hxai_core::artifact::ExplanationArtifact;
use hxai_core::io::SchemaDescriptor;
use hxai_core::plot::artifact_svg;
use hxai_core::rating::{Adjustment, Level, Metric, TransformOp, TreatmentDef};
use hxai_core::session::{
    bundled_scenario, Category, ExpectedDirection, Hypothesis, HypothesisRequest, Question, RatingParams, Role,
    ScenarioConfig, BUNDLED_SCENARIOS,
};
use hxai_core::tabular::CausalSpec;
use hxai_core::timeseries::{perturb, write_series_csv, Perturbation, PerturbationKind};

#[derive(Parser, Debug)]
#[command(name = "hxai", version, about = "Audit black-box models with causal ratings and explainers")]
pub struct Cli {
    /// Directory holding registered datasets and models; relative paths
    /// resolve against it.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Output directory, relative to the work directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every configured seed.
    #[arg(long, global = true, env = "HXAI_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register a dataset in the work directory.
    Ingest(IngestArgs),
    /// Train a built-in model or register an external or stored one.
    Train(TrainArgs),
    /// Rate models against the random and biased baselines.
    Rate(RateArgs),
    /// Explain a model.
    #[command(subcommand)]
    Explain(ExplainCommand),
    /// Test what a transform of one feature does to a model's output.
    Hypothesize(HypothesizeArgs),
    /// Write a perturbed copy of a series dataset.
    Perturb(PerturbArgs),
    /// Replay or inspect stakeholder scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true)))]
struct IngestArgs {
    #[arg(long)]
    id: String,
    /// Headed CSV file; needs --schema.
    #[arg(long, group = "source", requires = "schema")]
    csv: Option<PathBuf>,
    /// JSON schema sidecar for --csv.
    #[arg(long, requires = "csv")]
    schema: Option<PathBuf>,
    /// `date,close,company` CSV file.
    #[arg(long, group = "source")]
    series: Option<PathBuf>,
    /// The bundled German Credit data.
    #[arg(long, group = "source")]
    german_credit: bool,
    /// Age split for the derived age group; the median by default.
    #[arg(long, requires = "german_credit")]
    age_threshold: Option<f64>,
    /// The bundled synthetic six-company market.
    #[arg(long, group = "source")]
    synthetic_market: bool,
    #[arg(long, requires = "synthetic_market", default_value_t = 260)]
    days: usize,
    #[arg(long, requires = "synthetic_market", default_value = "2023-03-23")]
    start: chrono::NaiveDate,
    #[arg(long, requires = "synthetic_market", default_value_t = 2024)]
    market_seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelKind {
    Logistic,
    TreeEnsemble,
    Autoregressive,
    External,
    Stored,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    name: String,
    #[arg(long, value_enum)]
    kind: ModelKind,
    /// Training dataset id.
    #[arg(long)]
    data: Option<String>,
    /// Model config as inline JSON or `@file`.
    #[arg(long)]
    config: Option<String>,
    /// Comma-separated input features.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Hold out this fraction of rows from training.
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long, requires = "test_fraction", default_value_t = 0)]
    split_seed: u64,
    /// External model descriptor JSON file.
    #[arg(long)]
    descriptor: Option<PathBuf>,
    /// Stored model JSON file.
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RoleArg {
    Individual,
    Regulatory,
    Organizational,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Role {
        match r {
            RoleArg::Individual => Role::Individual,
            RoleArg::Regulatory => Role::Regulatory,
            RoleArg::Organizational => Role::Organizational,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AuditArg {
    All,
    Test,
}

#[derive(Args, Debug)]
struct SessionArgs {
    /// Dataset id.
    #[arg(long, required_unless_present = "session")]
    data: Option<String>,
    /// Model name; repeat for several. The first one is explained.
    #[arg(long = "model", required_unless_present = "session")]
    models: Vec<String>,
    #[arg(long, value_enum, default_value = "individual")]
    role: RoleArg,
    /// Protected attribute; repeat for several.
    #[arg(long = "protected")]
    protected: Vec<String>,
    /// Causal treatment feature.
    #[arg(long)]
    treatment: Option<String>,
    /// Causal outcome; the dataset outcome by default.
    #[arg(long, requires = "treatment")]
    outcome: Option<String>,
    #[arg(long, value_enum)]
    audit: Option<AuditArg>,
    /// Session request JSON file, instead of the flags above.
    #[arg(long, conflicts_with_all = ["data", "models", "protected", "treatment", "audit"])]
    session: Option<PathBuf>,
    /// Also write an SVG chart.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("op").multiple(false)))]
struct TransformArgs {
    /// Multiply the treatment feature by this factor.
    #[arg(long, group = "op")]
    scale: Option<f64>,
    /// Add this amount to the treatment feature.
    #[arg(long, group = "op")]
    shift: Option<f64>,
    /// Set the treatment feature to this value.
    #[arg(long = "set", group = "op")]
    set_to: Option<f64>,
    /// Observational contrast `treated:control`, numbers or labels.
    #[arg(long, group = "op")]
    contrast: Option<String>,
}

impl TransformArgs {
    fn def(&self, feature: Option<String>) -> AppResult<Option<TreatmentDef>> {
        let op = if let Some(k) = self.scale {
            TransformOp::Scale(k)
        } else if let Some(d) = self.shift {
            TransformOp::Shift(d)
        } else if let Some(v) = self.set_to {
            TransformOp::Set(v)
        } else {
            let Some(c) = &self.contrast else { return Ok(None) };
            let (p, p0) = c
                .split_once(':')
                .filter(|(p, p0)| !p.trim().is_empty() && !p0.trim().is_empty())
                .ok_or_else(|| AppError::Usage(format!("--contrast `{c}` is not of the form treated:control")))?;
            return Ok(Some(TreatmentDef::contrast(level(p), level(p0))));
        };
        Ok(Some(TreatmentDef::InterventionalTransform { op, feature }))
    }
}

fn level(s: &str) -> Level {
    match s.trim().parse::<f64>() {
        Ok(v) => Level::Value(v),
        Err(_) => Level::Label(s.trim().to_string()),
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum MetricArg {
    Wrs,
    Ate,
    Die,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AdjustArg {
    None,
    Psm,
    Gcomp,
}

impl From<AdjustArg> for Adjustment {
    fn from(a: AdjustArg) -> Adjustment {
        match a {
            AdjustArg::None => Adjustment::None,
            AdjustArg::Psm => Adjustment::Psm,
            AdjustArg::Gcomp => Adjustment::Gcomp,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PerturbationArg {
    DropToZero,
    MissingValues,
}

impl From<PerturbationArg> for PerturbationKind {
    fn from(p: PerturbationArg) -> PerturbationKind {
        match p {
            PerturbationArg::DropToZero => PerturbationKind::DropToZero,
            PerturbationArg::MissingValues => PerturbationKind::MissingValues,
        }
    }
}

#[derive(Args, Debug)]
struct RateArgs {
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[command(flatten)]
    transform: TransformArgs,
    #[arg(long, value_enum)]
    adjust: Option<AdjustArg>,
    /// Series sessions: the perturbation arm to rate.
    #[arg(long, value_enum)]
    perturbation: Option<PerturbationArg>,
    /// Series sessions: restrict to these companies.
    #[arg(long = "company")]
    companies: Vec<String>,
    /// Also report accuracy.
    #[arg(long)]
    accuracy: bool,
}

#[derive(Subcommand, Debug)]
enum ExplainCommand {
    /// Shapley attribution of one row or one forecast.
    Shap {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, required_unless_present = "company", conflicts_with = "company")]
        instance: Option<usize>,
        #[arg(long)]
        company: Option<String>,
        #[arg(long, requires = "company")]
        window: Option<usize>,
    },
    /// Partial dependence of the output on one feature.
    Pdp {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        feature: String,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Mean absolute Shapley values over many rows.
    Global {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        recent_lags: Option<usize>,
    },
    /// Smallest change that flips the predicted class.
    Counterfactual {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        instance: usize,
        #[arg(long, default_value_t = 1)]
        target_class: u8,
        /// Feature the search may change; repeat for several.
        #[arg(long = "mutable")]
        mutable: Vec<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ExpectArg {
    Increase,
    Decrease,
    None,
}

#[derive(Args, Debug)]
struct HypothesizeArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Feature the transform applies to.
    #[arg(long)]
    feature: String,
    #[command(flatten)]
    transform: TransformArgs,
    #[arg(long, value_enum)]
    expect: Option<ExpectArg>,
    #[arg(long, value_enum)]
    adjust: Option<AdjustArg>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    /// Series dataset id.
    #[arg(long)]
    data: String,
    #[arg(long, value_enum)]
    kind: PerturbationArg,
    #[arg(long, default_value_t = 80)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Also register the result under this dataset id.
    #[arg(long)]
    register: Option<String>,
}

#[derive(Subcommand, Debug)]
enum ScenarioCommand {
    /// Replay a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        #[arg(long)]
        svg: bool,
    },
    /// List the bundled scenarios.
    List,
    /// Print a bundled scenario's config.
    Show { name: String },
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Require `Authorization: Bearer <token>` on every endpoint but /health.
    #[arg(long, env = "HXAI_TOKEN")]
    token: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a [String],
    config_hash: String,
    seed: u64,
    versions: BTreeMap<&'static str, &'static str>,
    outputs: Vec<String>,
}

/// SHA-256 of the canonical (key-sorted) JSON of a run's configuration.
pub fn config_hash(config: &Value) -> String {
    let canonical = serde_json::to_string(config).expect("value serializes");
    hxai_core::io::sha256_hex(canonical.as_bytes())
}

fn versions() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([("hxai", env!("CARGO_PKG_VERSION")), ("hxai-core", hxai_core::VERSION)])
}

struct Run<'a> {
    ws: Workspace,
    out: PathBuf,
    seed: Option<u64>,
    argv: &'a [String],
    outputs: Vec<PathBuf>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> AppResult<()> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    fn artifact(&mut self, stem: &str, a: &ExplanationArtifact, svg: bool) -> AppResult<()> {
        self.write(&format!("{stem}.json"), a.to_json().as_bytes())?;
        if svg {
            if let Some(chart) = artifact_svg(a) {
                self.write(&format!("{stem}.svg"), chart.as_bytes())?;
            }
        }
        Ok(())
    }

    fn finish(mut self, config: Value, seed: u64) -> AppResult<()> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        let manifest = Manifest {
            command: self.argv,
            config_hash: config_hash(&config),
            seed,
            versions: versions(),
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        self.write("manifest.json", text.as_bytes())?;
        for p in &self.outputs {
            println!("{}", p.display());
        }
        Ok(())
    }

    fn session_request(&self, args: &SessionArgs) -> AppResult<SessionRequest> {
        let mut req = match &args.session {
            Some(path) => {
                let text = fs::read_to_string(self.ws.resolve(path))?;
                serde_json::from_str(&text).map_err(|e| AppError::invalid_json("session request", e))?
            }
            None => {
                let dataset = args.data.clone().expect("required by clap");
                let causal_spec = match &args.treatment {
                    Some(t) => {
                        let outcome = match &args.outcome {
                            Some(o) => o.clone(),
                            None => dataset_outcome(&self.ws.dataset_record(&dataset)?)?,
                        };
                        Some(CausalSpec::new(t.clone(), outcome, args.protected.iter().cloned()))
                    }
                    None => None,
                };
                SessionRequest {
                    id: None,
                    role: args.role.into(),
                    dataset,
                    models: args.models.clone(),
                    causal_spec,
                    protected: args.protected.clone(),
                    seed: 0,
                    settings: None,
                    baselines: None,
                    frame: None,
                    audit: args.audit.map(|a| match a {
                        AuditArg::All => AuditRows::All,
                        AuditArg::Test => AuditRows::Test,
                    }),
                }
            }
        };
        if let Some(seed) = self.seed {
            req.seed = seed;
        }
        Ok(req)
    }

    /// Answer one question in a fresh session and write its artifact.
    fn ask(self, args: &SessionArgs, stem: &str, question: Question) -> AppResult<()> {
        let req = self.session_request(args)?;
        self.ask_with(req, args.svg, stem, question)
    }

    fn ask_with(mut self, req: SessionRequest, svg: bool, stem: &str, question: Question) -> AppResult<()> {
        let mut session = self.ws.open_session("cli", &req)?;
        let artifact = session.ask(question.clone())?;
        self.artifact(stem, &artifact, svg)?;
        let seed = req.seed;
        self.finish(json!({ "session": req, "question": question }), seed)
    }
}

fn dataset_outcome(record: &DatasetRecord) -> AppResult<String> {
    record
        .outcome
        .clone()
        .ok_or_else(|| AppError::Usage(format!("dataset `{}` has no outcome column; pass --outcome", record.id)))
}

fn read_text(ws: &Workspace, path: &Path) -> AppResult<String> {
    let path = ws.resolve(path);
    fs::read_to_string(&path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

fn json_arg(ws: &Workspace, s: &str) -> AppResult<Value> {
    let text = match s.strip_prefix('@') {
        Some(path) => read_text(ws, Path::new(path))?,
        None => s.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| AppError::invalid_json("--config", e))
}

fn question(category: Category, params: impl Serialize) -> Question {
    Question::new(category, serde_json::to_value(params).expect("params serialize"))
}

fn run(cli: Cli, argv: &[String]) -> AppResult<()> {
    let ws = Workspace::new(cli.workdir.clone());
    let out = ws.resolve(&cli.out);
    let mut run = Run {
        ws,
        out,
        seed: cli.seed,
        argv,
        outputs: Vec::new(),
    };
    match cli.command {
        Command::Ingest(a) => {
            let upload = if let Some(csv) = &a.csv {
                let schema_text = read_text(&run.ws, a.schema.as_deref().expect("required by clap"))?;
                let schema: SchemaDescriptor =
                    serde_json::from_str(&schema_text).map_err(|e| AppError::invalid_json("--schema", e))?;
                DatasetUpload::Csv {
                    csv: read_text(&run.ws, csv)?,
                    schema,
                }
            } else if let Some(series) = &a.series {
                DatasetUpload::SeriesCsv {
                    csv: read_text(&run.ws, series)?,
                }
            } else if a.german_credit {
                DatasetUpload::GermanCredit {
                    age_threshold: a.age_threshold,
                }
            } else {
                DatasetUpload::SyntheticMarket {
                    days: a.days,
                    start: a.start,
                    seed: run.seed.unwrap_or(a.market_seed),
                }
            };
            let req = DatasetRequest { id: a.id, upload };
            let record = run.ws.add_dataset(&req)?;
            run.write("dataset.json", &pretty(&record))?;
            let config = json!({ "dataset": record });
            run.finish(config, run_seed(cli.seed))
        }
        Command::Train(a) => {
            let kind = match a.kind {
                ModelKind::Logistic => "logistic",
                ModelKind::TreeEnsemble => "tree_ensemble",
                ModelKind::Autoregressive => "autoregressive",
                ModelKind::External => "external",
                ModelKind::Stored => "stored",
            };
            let mut spec = match a.kind {
                ModelKind::External => {
                    let path = a
                        .descriptor
                        .as_ref()
                        .ok_or_else(|| AppError::Usage("--kind external needs --descriptor".into()))?;
                    let mut d = json_arg(&run.ws, &format!("@{}", path.display()))?;
                    d["info"]["name"] = json!(a.name);
                    d
                }
                ModelKind::Stored => {
                    let path = a.path.as_ref().ok_or_else(|| AppError::Usage("--kind stored needs --path".into()))?;
                    json!({ "path": run.ws.resolve(path), "name": a.name })
                }
                _ => {
                    let mut config = match &a.config {
                        Some(c) => json_arg(&run.ws, c)?,
                        None => json!({}),
                    };
                    if let (Some(seed), ModelKind::TreeEnsemble) = (run.seed, a.kind) {
                        config["seed"] = json!(seed);
                    }
                    let mut s = json!({ "name": a.name, "config": config });
                    if let Some(f) = &a.features {
                        s["features"] = json!(f);
                    }
                    s
                }
            };
            spec["kind"] = json!(kind);
            if let Some(d) = &a.data {
                spec["dataset"] = json!(d);
            }
            if let Some(f) = a.test_fraction {
                spec["split"] = json!({ "test_fraction": f, "seed": a.split_seed });
            }
            let req: ModelRequest =
                serde_json::from_value(spec).map_err(|e| AppError::invalid_json("model request", e))?;
            let record = run.ws.add_model(&req)?;
            run.write("model.json", &pretty(&record))?;
            run.finish(json!({ "model": req }), run_seed(cli.seed))
        }
        Command::Rate(a) => {
            let treatment = a.transform.def(None)?;
            let metric = match a.metric {
                MetricArg::Wrs => Metric::Wrs,
                MetricArg::Ate => Metric::Ate,
                MetricArg::Die => Metric::Die,
            };
            if metric == Metric::Wrs && (treatment.is_some() || a.adjust.is_some()) {
                return Err(AppError::Usage("--metric wrs takes no transform, contrast or --adjust".into()));
            }
            if metric != Metric::Wrs && treatment.is_none() && a.perturbation.is_none() {
                return Err(AppError::Usage(format!(
                    "--metric {} needs --scale, --shift, --set, --contrast or --perturbation",
                    metric.as_str()
                )));
            }
            let params = RatingParams {
                metric: Some(metric),
                treatment,
                adjust: a.adjust.map(Into::into),
                perturbation: a.perturbation.map(Into::into),
                companies: (!a.companies.is_empty()).then(|| a.companies.clone()),
                accuracy: a.accuracy,
                ..Default::default()
            };
            let mut req = run.session_request(&a.session)?;
            // A perturbation arm the frame lacks is added with the default period.
            if let Some(kind) = params.perturbation {
                let frame = req.frame.get_or_insert_with(Default::default);
                if !frame.perturbations.iter().any(|p| p.kind == kind) {
                    frame.perturbations.push(Perturbation::new(kind));
                }
            }
            run.ask_with(req, a.session.svg, "rating", question(Category::BaselineResemblance, params))
        }
        Command::Explain(e) => match e {
            ExplainCommand::Shap {
                session,
                instance,
                company,
                window,
            } => {
                let mut p = serde_json::Map::new();
                if let Some(i) = instance {
                    p.insert("instance".into(), json!(i));
                }
                if let Some(c) = company {
                    p.insert("company".into(), json!(c));
                }
                if let Some(w) = window {
                    p.insert("window".into(), json!(w));
                }
                run.ask(&session, "shap", question(Category::LocalAttribution, p))
            }
            ExplainCommand::Pdp { session, feature, grid } => {
                let mut p = json!({ "feature": feature });
                if let Some(g) = grid {
                    p["grid_size"] = json!(g);
                }
                run.ask(&session, "pdp", question(Category::GlobalFeatureEffect, p))
            }
            ExplainCommand::Global {
                session,
                rows,
                recent_lags,
            } => {
                let mut p = serde_json::Map::new();
                if let Some(r) = rows {
                    p.insert("n_rows".into(), json!(r));
                }
                if let Some(k) = recent_lags {
                    p.insert("recent_lags".into(), json!(k));
                }
                run.ask(&session, "global_shap", question(Category::GlobalAttribution, p))
            }
            ExplainCommand::Counterfactual {
                session,
                instance,
                target_class,
                mutable,
            } => {
                let mut p = json!({ "instance": instance, "target_class": target_class });
                if !mutable.is_empty() {
                    p["mutable"] = json!(mutable);
                }
                run.ask(&session, "counterfactual", question(Category::MinimalChange, p))
            }
        },
        Command::Hypothesize(a) => {
            if a.transform.contrast.is_some() {
                return Err(AppError::Usage("hypotheses take a transform, not --contrast".into()));
            }
            let treatment = a
                .transform
                .def(Some(a.feature.clone()))?
                .ok_or_else(|| AppError::Usage("hypothesize needs --scale, --shift or --set".into()))?;
            let req = run.session_request(&a.session)?;
            let request = HypothesisRequest {
                model: None,
                hypothesis: Hypothesis {
                    treatment,
                    expected_direction: match a.expect {
                        Some(ExpectArg::Increase) => ExpectedDirection::Increase,
                        Some(ExpectArg::Decrease) => ExpectedDirection::Decrease,
                        Some(ExpectArg::None) => ExpectedDirection::None,
                        None => ExpectedDirection::Unspecified,
                    },
                    adjust: a.adjust.map(Into::into).unwrap_or_default(),
                },
            };
            let mut session = run.ws.open_session("cli", &req)?;
            let artifact = session.hypothesize(request.clone())?;
            run.artifact("hypothesis", &artifact, false)?;
            let seed = req.seed;
            run.finish(json!({ "session": req, "hypothesis": request }), seed)
        }
        Command::Perturb(a) => {
            let (_, loaded) = run.ws.dataset(&a.data)?;
            let crate::workspace::Loaded::Series(series) = loaded else {
                return Err(AppError::Usage(format!("`{}` is not a series dataset", a.data)));
            };
            let p = Perturbation {
                kind: a.kind.into(),
                period: a.period,
                offset: a.offset,
            };
            let perturbed = series
                .into_iter()
                .map(|mut s| {
                    s.close = perturb(&s.close, &p)?;
                    Ok(s)
                })
                .collect::<hxai_core::Result<Vec<_>>>()?;
            let mut csv = Vec::new();
            write_series_csv(&perturbed, &mut csv)?;
            run.write("perturbed.csv", &csv)?;
            if let Some(id) = &a.register {
                let record = run.ws.add_dataset(&DatasetRequest {
                    id: id.clone(),
                    upload: DatasetUpload::SeriesCsv {
                        csv: String::from_utf8(csv).expect("csv writer emits utf-8"),
                    },
                })?;
                run.write("dataset.json", &pretty(&record))?;
            }
            run.finish(json!({ "dataset": a.data, "perturbation": p }), run_seed(cli.seed))
        }
        Command::Scenario(ScenarioCommand::List) => {
            for (name, text) in BUNDLED_SCENARIOS {
                let c = ScenarioConfig::from_json(text)?;
                println!("{name}\t{}", c.description);
            }
            Ok(())
        }
        Command::Scenario(ScenarioCommand::Show { name }) => {
            let text = bundled_scenario(&name).ok_or_else(|| AppError::NotFound {
                what: "scenario",
                id: name.clone(),
            })?;
            print!("{text}");
            Ok(())
        }
        Command::Scenario(ScenarioCommand::Run { scenario, svg }) => {
            let (mut config, base) = load_scenario(&run.ws, &scenario)?;
            if let Some(seed) = run.seed {
                config.seed = seed;
            }
            let session = config.run(&base)?;
            for (i, entry) in session.history().iter().enumerate() {
                run.artifact(&format!("artifact-{:02}", i + 1), &entry.artifact, svg)?;
            }
            let report = session.render_report()?;
            run.write("report.json", report.to_json().as_bytes())?;
            run.write("report.txt", report.to_text().as_bytes())?;
            let seed = config.seed;
            run.finish(json!({ "scenario": config }), seed)
        }
        Command::Serve(a) => {
            let config = crate::service::ServeConfig {
                host: a.host,
                port: a.port,
                workdir: run.ws.root().to_path_buf(),
                token: a.token,
            };
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(crate::service::serve(config))
        }
    }
}

fn run_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or(0)
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("record serializes");
    s.push(b'\n');
    s
}

/// A scenario file (relative paths inside resolve against its directory)
/// or, failing that, a bundled scenario named by the file stem.
fn load_scenario(ws: &Workspace, arg: &str) -> AppResult<(ScenarioConfig, PathBuf)> {
    let path = ws.resolve(Path::new(arg));
    if path.is_file() {
        let text = fs::read_to_string(&path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((ScenarioConfig::from_json(&text)?, base));
    }
    let stem = Path::new(arg)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match bundled_scenario(&stem) {
        Some(text) => Ok((ScenarioConfig::from_json(text)?, ws.root().to_path_buf())),
        None => Err(AppError::NotFound {
            what: "scenario",
            id: arg.to_string(),
        }),
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            match e {
                AppError::Usage(_) => 2,
                _ => 1,
            }
        }
    }
}
