//! Error taxonomy shared by every module.
//!
//! The variants map one-to-one onto the process exit codes of the CLI:
//! parse/domain problems (2), violated mathematical preconditions (3),
//! blown capacity budgets (4) and failed certifications (5).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad file syntax, an element outside its group,
    /// a parameter outside its documented domain.
    #[error("domain: {0}")]
    Domain(String),

    /// A mathematical precondition of an operation does not hold
    /// (e.g. a bias ≥ 1 input where amplification needs bias < 1).
    #[error("precondition: {0}")]
    Precondition(String),

    /// A size budget would be exceeded (group enumeration cap, dense
    /// matrix cap, walk materialization budget, port tables, ...).
    #[error("capacity: {0}")]
    Capacity(String),

    /// An iterative solver did not converge; carries the best estimate
    /// so callers can report it.
    #[error("convergence: {msg} (best estimate {best:.6e}, residual {residual:.3e})")]
    Convergence {
        msg: String,
        best: f64,
        residual: f64,
    },

    /// An auxiliary-expander provider could not satisfy a request.
    #[error("provider: {0}")]
    Provider(String),

    /// A certification check failed: a measured quantity missed its target.
    #[error("certification: {0}")]
    Certification(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
    pub fn provider(msg: impl Into<String>) -> Self {
        Error::Provider(msg.into())
    }
    pub fn certification(msg: impl Into<String>) -> Self {
        Error::Certification(msg.into())
    }
}
