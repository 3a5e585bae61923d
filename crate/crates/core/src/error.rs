//! Error type shared by all modules.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its domain (non-positive sigma, p <= 1, ...).
    ParamDomain(String),
    /// The requested operation is outside the regime where it is defined
    /// (supercritical lifespan exponent, profile/regime mismatch, ...).
    Regime(String),
    /// A dimension-window restriction failed; the message names the violated
    /// inequality.
    Window(String),
    /// Quadrature or a fit did not reach the requested accuracy.
    Accuracy { achieved: f64, requested: f64, what: String },
    /// Long-time linear evolution requested in the unstable regime.
    InstabilityGuard(String),
    /// The periodic box is too small for the requested spatial check.
    DomainTooSmall(String),
    /// Grid/field shape mismatch.
    ShapeMismatch(String),
    /// A trajectory or series does not cover what the operation needs.
    InsufficientData(String),
    /// Configuration file or plan errors.
    Config(String),
    /// Filesystem errors while persisting results.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ParamDomain(m) => write!(f, "parameter domain error: {m}"),
            Error::Regime(m) => write!(f, "regime error: {m}"),
            Error::Window(m) => write!(f, "dimension window error: {m}"),
            Error::Accuracy { achieved, requested, what } => {
                write!(f, "accuracy error in {what}: achieved {achieved:.3e}, requested {requested:.3e}")
            }
            Error::InstabilityGuard(m) => write!(f, "instability guard: {m}"),
            Error::DomainTooSmall(m) => write!(f, "domain too small: {m}"),
            Error::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
            Error::InsufficientData(m) => write!(f, "insufficient data: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
