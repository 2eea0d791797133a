pub mod baselines;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod sbm;
pub mod seeds;
pub mod spectral;
pub mod subsearch;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{Graph, NodeSubset};
