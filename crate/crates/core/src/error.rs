use thiserror::Error;

/// Errors raised by the numerical kernels, model catalog and CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("unknown catalog id `{0}`")]
    UnknownModel(String),

    #[error("unknown transformation chain `{0}`")]
    UnknownChain(String),

    #[error("{what} did not converge: achieved {achieved:e} after {iterations} iterations")]
    Convergence {
        what: &'static str,
        achieved: f64,
        iterations: usize,
    },

    #[error("Jacobian vanishes at x = {x} (t = {t})")]
    SingularJacobian { t: f64, x: f64 },

    #[error("transformation has {pieces} monotone pieces on the diffusion interval; use the non-monotone route")]
    NotMonotone { pieces: usize },

    #[error("time map is not invertible: {0}")]
    TimeMap(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
