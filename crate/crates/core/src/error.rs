use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or too-small input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A requested target probability cannot be reached for any survival in [0, 1].
    #[error("target {target} is infeasible: attainable range is (0, {max}]")]
    Infeasible { target: f64, max: f64 },

    /// Fewer atoms loaded than the rearrangement needs; the loading cycle must be repeated.
    #[error("insufficient atoms ({loaded} loaded, {required} required): reload")]
    InsufficientAtoms { loaded: usize, required: usize },

    /// The transmission curve has a single maximum; no splitting to report.
    #[error("vacuum Rabi splitting is unresolved")]
    Unresolved,

    /// Amplitude feedback did not reach the requested uniformity.
    #[error("amplitude balancing did not converge after {iterations} iterations (spread {spread})")]
    NonConvergence { iterations: usize, spread: f64 },

    /// Two tone trajectories touched or crossed; always a planner bug.
    #[error("tone trajectories {lower} and {upper} cross at sample {sample}")]
    Crossing {
        lower: usize,
        upper: usize,
        sample: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
