use thiserror::Error;

/// Errors produced by the motion-primitive pipeline.
#[derive(Debug, Error)]
pub enum GdmpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate path: total length {length:.6e} m is shorter than the spatial period {delta:.6e} m")]
    DegeneratePath { length: f64, delta: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular fit: {0}; use a positive ridge")]
    SingularFit(String),

    #[error("degenerate modulation on axis {axis}: goal equals start")]
    DegenerateModulation { axis: usize },

    #[error("integration diverged at step {step} (t = {t:.6} s)")]
    Divergence { step: usize, t: f64 },

    #[error("infeasible phase: empty admissible acceleration at s = {s:.6} m")]
    Infeasible { s: f64 },

    #[error("regularity violation: tangent norm {norm:.4} at s = {s:.6} m")]
    RegularityViolation { s: f64, norm: f64 },

    #[error("unreachable target at sample {index} (s = {s:.6} m): distance deficit {deficit:.6e} m")]
    Unreachable { index: usize, s: f64, deficit: f64 },

    #[error("joint {joint} value {value:.6} rad outside limits at sample {index}")]
    JointLimit { index: usize, joint: usize, value: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GdmpError {
    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            GdmpError::InvalidParameter(_) => "invalid-parameter",
            GdmpError::DegeneratePath { .. } => "degenerate-path",
            GdmpError::InsufficientData(_) => "insufficient-data",
            GdmpError::SingularFit(_) => "singular-fit",
            GdmpError::DegenerateModulation { .. } => "degenerate-modulation",
            GdmpError::Divergence { .. } => "divergence",
            GdmpError::Infeasible { .. } => "infeasible",
            GdmpError::RegularityViolation { .. } => "regularity-violation",
            GdmpError::Unreachable { .. } => "unreachable",
            GdmpError::JointLimit { .. } => "joint-limit",
            GdmpError::Parse(_) => "parse",
            GdmpError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, GdmpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> GdmpError {
    GdmpError::InvalidParameter(msg.into())
}
