use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),

    #[error("field point at y = {y:e} m is not above the electrode plane")]
    BelowSurface { y: f64 },

    #[error("unknown electrode `{0}`")]
    UnknownElectrode(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("minimum search did not converge after {iterations} iterations (|grad| = {grad_norm:e} eV/m)")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("minimum escaped to the surface (y = {y:e} m)")]
    EscapedToSurface { y: f64 },

    #[error("voltage bound active on {electrodes:?} (|V| <= {bound} V); target not reachable, residual {residual:e}")]
    InfeasibleBound {
        electrodes: Vec<String>,
        bound: f64,
        residual: f64,
    },

    #[error("allowed electrodes cannot produce the requested target (relative residual {relative_residual:e})")]
    RankDeficient { relative_residual: f64 },

    #[error("waypoint {index} at z = {z:e} m infeasible: {source}")]
    Waypoint {
        index: usize,
        z: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("thermal basis truncation failed: tail mass {tail:e} with n_max = {n_max}")]
    Truncation { tail: f64, n_max: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
