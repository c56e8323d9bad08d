use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed image: {0}")]
    Image(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("annulus exceeds omni image bounds")]
    AnnulusOutOfBounds,

    #[error("point lies on the cylinder axis, azimuth undefined")]
    OnAxis,

    #[error("degenerate window")]
    DegenerateWindow,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient motion data: {valid} valid samples, need at least {required}")]
    InsufficientMotionData { valid: usize, required: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("fit did not converge on the {axis} axis")]
    NotConverged { axis: &'static str },
}

impl Error {
    /// Stable short tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Config(_) => "config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::AnnulusOutOfBounds => "annulus_out_of_bounds",
            Error::OnAxis => "on_axis",
            Error::DegenerateWindow => "degenerate_window",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InsufficientMotionData { .. } => "insufficient_motion_data",
            Error::Fit(_) => "fit_failed",
            Error::NotConverged { .. } => "not_converged",
        }
    }
}
