//! Fast greedy equivalence search (FGS) for linear-Gaussian causal structure
//! learning, with a SEM simulator and a precision/recall harness.
//!
//! - [`graph`]: mixed graphs, Meek rules, pattern reversion.
//! - [`score`]: BIC with covariances computed on demand.
//! - [`search`]: the forward/backward greedy search.
//! - [`simulate`]: random DAGs and linear-Gaussian samples.
//! - [`metrics`]: adjacency and arrow precision/recall.
//! - [`cli`]: the `fgs` command line.

pub mod cli;
pub mod data;
pub mod graph;
pub mod metrics;
pub mod score;
pub mod search;
pub mod simulate;

pub use data::Dataset;
pub use graph::{Edge, EdgeKind, MixedGraph};
pub use metrics::{compare_patterns, ComparisonStats};
pub use score::{CovarianceSource, GaussianBic, ScoreConfig};
pub use search::{fgs, Fgs, SearchConfig};
pub use simulate::{simulate, SemModel, SimConfig};
