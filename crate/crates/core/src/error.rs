use thiserror::Error;

/// Every failure the engine can report. Variant names follow the error
/// vocabulary of the public operations so callers can match on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // tabular
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{0}` is numeric; bin it before partitioning")]
    NumericAttributeRequiresBinning(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid causal spec: {0}")]
    InvalidCausalSpec(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("max_residual_per_window requires window metadata")]
    MissingWindowMetadata,

    // io
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("unknown code `{code}` in column `{column}`")]
    UnknownCode { column: String, code: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("checksum mismatch: expected {expected}, got {actual}")]
    ChecksumMismatch { expected: String, actual: String },

    // models
    #[error("outcome `{0}` has a single class or value")]
    DegenerateOutcome(String),
    #[error("non-finite value in feature `{0}`")]
    NonFiniteFeature(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("classification score {0} outside [0, 1]")]
    CodomainViolation(f64),
    #[error("model expects {expected} features per row, got {found}")]
    FeatureCount { expected: usize, found: usize },

    // baselines
    #[error("random regression baseline requires a range")]
    MissingRange,
    #[error("no biased output configured for group `{0}`")]
    UncoveredGroup(String),

    // rating
    #[error("t-test needs at least two observations per sample")]
    SampleTooSmall,
    #[error("group `{0}` has fewer than two outcomes")]
    GroupTooSmall(String),
    #[error("treated arm is empty")]
    EmptyTreatedArm,
    #[error("control arm is empty")]
    EmptyControlArm,
    #[error("adjustment `{0}` is not supported for this treatment")]
    UnsupportedAdjustment(String),
    #[error("all rows fall in one treatment arm")]
    AllRowsOneArm,
    #[error("no treated row has a control within the caliper")]
    NoMatchesWithinCaliper,
    #[error("outcome ensemble failed to fit: {0}")]
    EnsembleFitFailure(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    // explainers
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("{count} features exceed the exact enumeration limit of {max}")]
    TooManyFeatures { count: usize, max: usize },
    #[error("model is not a tree ensemble")]
    NonTreeModel,
    #[error("need at least {needed} windows, got {got}")]
    InsufficientWindows { needed: usize, got: usize },
    #[error("no mutable features to change")]
    NoMutableFeatures,
    #[error("row is already classified as the target class")]
    AlreadyTargetClass,

    // timeseries
    #[error("training series is constant; naive error is zero")]
    ZeroNaiveError,
    #[error("perturbation kind `none` is not a perturbation")]
    NoPerturbation,

    // session
    #[error("unknown question category `{0}`")]
    UnknownCategory(String),
    #[error("invalid parameters for `{category}`: {message}")]
    InvalidParams { category: String, message: String },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("session has no history")]
    EmptySession,
    #[error("{0}")]
    Unsupported(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
