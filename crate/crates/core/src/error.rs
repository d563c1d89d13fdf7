use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    NotAProbability { name: &'static str, value: f64 },

    #[error("p(E=1) = {0} leaves an exposure arm unobserved; it must lie strictly inside (0, 1)")]
    UnobservedArm(f64),

    #[error("M = {value} is infeasible: M must lie in [{lower}, 1]")]
    InfeasibleM { value: f64, lower: f64 },

    #[error("m = {value} is infeasible: m must lie in [0, {upper}]")]
    InfeasibleSmallM { value: f64, upper: f64 },

    #[error("m = {m} exceeds M = {big_m}")]
    Inverted { m: f64, big_m: f64 },

    #[error("indeterminate form {form} in contrast `{contrast}`")]
    Indeterminate { contrast: String, form: &'static str },

    #[error("custom contrast `{name}` is not monotone: {detail}")]
    NonMonotone { name: String, detail: String },

    #[error("unknown contrast `{0}` (expected rr, rd, or, od)")]
    UnknownContrast(String),

    #[error("grid needs at least 2 steps, got {0}")]
    TooFewSteps(usize),

    #[error("epsilon = {0} is out of range; it must lie strictly inside (0, 1)")]
    EpsilonOutOfRange(f64),

    #[error("sampling support ({low}, {high}) has zero length")]
    DegenerateSupport { low: f64, high: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distribution support ({low}, {high}) does not match the feasible region bound [{expected_low}, {expected_high}]")]
    SupportMismatch {
        low: f64,
        high: f64,
        expected_low: f64,
        expected_high: f64,
    },

    #[error("n_samples and histogram_bins must be positive")]
    EmptyRun,

    #[error("exposure arm E={0} has no observations")]
    EmptyArm(u8),

    #[error("row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },

    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Whether the error comes from reading or parsing input rather than
    /// from the values themselves.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Parse(_) | Error::MalformedRow { .. } | Error::MissingColumn(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}
