use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside theorem regime: {0}")]
    OutOfRegime(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("flow diverged: |y| = {norm:.3e} exceeds safety radius {radius:.3e} at t = {t:.6}")]
    Divergence { t: f64, norm: f64, radius: f64 },

    #[error("grid too coarse: eigenvalue {index} moved by {rel_change:.3e} under grid doubling")]
    GridTooCoarse { index: usize, rel_change: f64 },

    #[error("finite-difference step too small: asymmetry {asymmetry:.3e}")]
    StepTooSmall { asymmetry: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::OutOfRegime(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures caused by floating-point evaluation rather than
    /// by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_)
                | Error::Divergence { .. }
                | Error::GridTooCoarse { .. }
                | Error::StepTooSmall { .. }
        )
    }
}
