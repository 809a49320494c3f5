use thiserror::Error;

/// Failures raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("discretization error: {0}")]
    Discretization(String),
    #[error("guard failure: {0}")]
    Guard(String),
    #[error("numerical instability at t = {t}")]
    Instability { t: f64 },
    #[error("left modulation window: a = {a} at t = {t}")]
    LeftWindow { a: f64, t: f64 },
    #[error("horizon too short: {0}")]
    Horizon(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
