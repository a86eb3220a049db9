use thiserror::Error;

/// Coarse failure class used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("region {0} has no neighbors; row normalization is undefined")]
    IsolatedRegion(usize),
    #[error("spatial dependence parameter {value} outside {interval}")]
    RhoOutOfRange { value: f64, interval: &'static str },
    #[error("AR coefficients are non-stationary: root magnitude {0} not outside the unit circle")]
    NonStationary(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unknown station `{0}` not present in the graph")]
    UnknownStation(String),
    #[error("duplicate cell for station {station}, time {time}")]
    DuplicateCell { station: String, time: usize },
    #[error("truncation region degenerate: {0}")]
    DegenerateRegion(String),
    #[error("matrix not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("need at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("all values are equal; statistic undefined")]
    ZeroVariance,
    #[error("dataset carries no detection limit; cannot impute")]
    NoLodRecorded,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            ConfigError(_) | TooFewChains(_) | DimensionMismatch(_) | DomainError(_)
            | RhoOutOfRange { .. } | NonStationary(_) => ErrorClass::Config,
            ParseError { .. } | UnknownStation(_) | DuplicateCell { .. } | Io(_)
            | NoLodRecorded | LengthMismatch { .. } | IsolatedRegion(_) | ZeroVariance => {
                ErrorClass::Data
            }
            NumericalFailure(_) | NotSpd(_) | DegenerateRegion(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
