use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operation requires a field on a circle grid")]
    NotCircleGrid,

    #[error("grid or shape mismatch: {0}")]
    Mismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("field is off the sphere: drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    OffSphere { drift: f64, tol: f64 },

    #[error("cannot project onto the sphere: |u| = {norm:.3e} at node {node}")]
    Degenerate { node: usize, norm: f64 },

    #[error("calibration failed: relative residual {residual:.3e} exceeds {limit:.3e}")]
    Calibration { residual: f64, limit: f64 },

    #[error("no calibration record available for the nonlinearity")]
    MissingCalibration,

    #[error("kernel is not divergence free: relative pairing {0:.3e}")]
    NotDivergenceFree(f64),

    #[error("trace does not cover the requested time {t} (range {start}..{end})")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("restart limit reached: {restarts} restarts, bound {bound}")]
    RestartLimit { restarts: usize, bound: usize },

    #[error("optimization stalled: {0}")]
    Stalled(String),

    #[error("acceptance criteria failed: {0:?}")]
    AcceptanceFailed(Vec<u32>),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::NotCircleGrid => "not_circle_grid",
            Error::Mismatch(_) => "mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite => "non_finite",
            Error::OffSphere { .. } => "off_sphere",
            Error::Degenerate { .. } => "degenerate_projection",
            Error::Calibration { .. } => "calibration_failure",
            Error::MissingCalibration => "missing_calibration",
            Error::NotDivergenceFree(_) => "not_divergence_free",
            Error::OutOfRange { .. } => "out_of_range",
            Error::RestartLimit { .. } => "restart_limit",
            Error::Stalled(_) => "stalled",
            Error::AcceptanceFailed(_) => "acceptance_failed",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

impl Error {
    /// Structured fields of the error, for machine-readable reports.
    pub fn details(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            Error::OffSphere { drift, tol } => json!({ "drift": drift, "tol": tol }),
            Error::Degenerate { node, norm } => json!({ "node": node, "norm": norm }),
            Error::Calibration { residual, limit } => json!({ "residual": residual, "limit": limit }),
            Error::NotDivergenceFree(defect) => json!({ "defect": defect }),
            Error::OutOfRange { t, start, end } => json!({ "t": t, "start": start, "end": end }),
            Error::RestartLimit { restarts, bound } => json!({ "restarts": restarts, "bound": bound }),
            Error::AcceptanceFailed(ids) => json!({ "failed": ids }),
            _ => json!({}),
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
