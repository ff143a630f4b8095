use thiserror::Error;

#[derive(Debug, Error)]
pub enum NkError {
    #[error("zero quaternion has no inverse")]
    ZeroQuaternion,
    #[error("quaternion norm {norm} is too far from 1 for a unit quaternion")]
    NotUnit { norm: f64 },
    #[error("quaternion has real part {re}, expected an imaginary quaternion")]
    NotImaginary { re: f64 },
    #[error("vector is not tangent at its base point (normal component {residual:e})")]
    NotTangent { residual: f64 },
    #[error("tangent vectors live at different base points")]
    BaseMismatch,
    #[error("chart point {point:?} is outside the domain or too close to its boundary")]
    OutOfDomain { point: [f64; 3] },
    #[error("differential is rank deficient at {point:?} (singular values {singular:?})")]
    RankDeficient { point: [f64; 3], singular: Vec<f64> },
    #[error("map is not Lagrangian at {point:?} (residual {residual:e})")]
    NotLagrangian { point: [f64; 3], residual: f64 },
    #[error("A and B do not commute (|AB - BA| = {residual:e})")]
    NonCommuting { residual: f64 },
    #[error("eigenbasis is not continuous near {point:?}: {reason}")]
    EigenbasisDiscontinuity { point: [f64; 3], reason: String },
    #[error("Newton iteration did not converge; residual history {history:?}")]
    NewtonDivergence { history: Vec<f64> },
    #[error("integration drift {drift:e} exceeds gate {gate:e}")]
    Drift { drift: f64, gate: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = NkError> = std::result::Result<T, E>;
