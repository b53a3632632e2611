use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    MatrixNotSpd { pivot: usize, value: f64 },

    #[error("iteration did not converge after {iterations} steps: {what}")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("snapshot is numerically dependent on the current basis (relative norm {ratio:e})")]
    NearDependent { ratio: f64 },

    #[error("singular reduced system")]
    SingularSystem,

    #[error("parameter {0:?} lies outside the parameter box")]
    OutOfBox(Vec<f64>),

    #[error("certificate unavailable: coercivity lower bound {alpha_lb:e} is not positive")]
    CertificateUnavailable { alpha_lb: f64 },

    #[error("model is not certified (final tolerance {delta:.4} >= 1)")]
    Uncertified { delta: f64 },

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
