use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver stalled after {iterations} iterations")]
    Stalled { iterations: usize },

    #[error("unbounded erosion: disturbance set has no finite support in direction {direction:?}")]
    UnboundedErosion { direction: Vec<f64> },

    #[error("set is unbounded in direction {direction:?}")]
    Unbounded { direction: Vec<f64> },

    #[error("state {state:?} lies outside every partition region")]
    OutsidePartition { state: Vec<f64> },

    #[error("bounding box does not intersect the sampled set")]
    EmptySampleRegion,

    #[error("monotonicity violated at iteration {k}: {point:?} is in the new iterate but not the previous one")]
    Monotonicity { k: usize, point: Vec<f64> },

    #[error("governor infeasible at state {state:?}: {detail}")]
    GovernorInfeasible { state: Vec<f64>, detail: String },

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("safety violation during shielded run: {0}")]
    ShieldedViolation(String),

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
