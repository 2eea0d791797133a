use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("degenerate spectrum: requested {requested} non-zero eigenvalues, only {available} available")]
    DegenerateSpectrum { requested: usize, available: usize },

    #[error("infeasible subgraph size {requested}: largest connected component has {component} nodes")]
    Infeasible { requested: usize, component: usize },

    #[error("no connected swap found after {retries} proposals")]
    StuckNeighborhood { retries: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
