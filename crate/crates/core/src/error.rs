use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{flavor}: γ = {gamma} is supercritical ({requirement})")]
    Supercritical { flavor: &'static str, gamma: f64, requirement: &'static str },

    #[error("value {value} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("path left the tabulated range at time {time} (position {position}, range [{lo}, {hi}])")]
    RangeExit { time: f64, position: f64, lo: f64, hi: f64 },

    #[error("covariance matrix not positive semi-definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("field cutoff ε = {eps} unresolved by path step √Δt = {step} (need ε ≥ 2√Δt)")]
    UnresolvedCutoff { eps: f64, step: f64 },

    #[error("clock horizon extension exhausted: F(horizon) = {attained} < target {target}")]
    HorizonExhausted { attained: f64, target: f64 },

    #[error("critical map not strictly increasing: aggregate starting at x = {x} has mass {mass}")]
    NonMonotone { x: f64, mass: f64 },

    #[error("divergence test inconclusive: {table}")]
    DivergenceInconclusive { table: String },

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(String),

    #[error("{experiment}: {source}")]
    Experiment { experiment: &'static str, source: Box<Error> },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
