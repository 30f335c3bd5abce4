use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The optimizer ran out of iterations. `best` holds the flattened
    /// best-so-far free variables.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e}, energy {energy:.12e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
        energy: f64,
        best: Vec<f64>,
    },

    #[error("non-finite energy at grid node (r index {i}, theta index {j})")]
    NonFinite { i: usize, j: usize },

    #[error("theta = pi is the antipodal stationary point of the +e3 heteroclinic; use the -e3 target")]
    DegenerateAntipode,

    #[error("rejected grid: {0}")]
    RejectedGrid(String),

    #[error("rejected spec: {0}")]
    RejectedSpec(String),

    #[error("need at least {needed} usable records to fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("unknown output format `{0}` (supported: csv, json, svg)")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
