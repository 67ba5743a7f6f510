//! Measuring how language models represent years.
//!
//! The crate covers the analysis side of the pipeline: theoretical distance
//! metrics between years, regression of judged similarity onto them, the
//! sliding-window reference estimate, temporal-neuron screening, linear
//! probes over hidden states, embedding geometry, the binary dump format
//! that carries activations between tools, and seeded generators used to
//! test all of the above.

pub mod analysis;
pub mod dumpio;
pub mod embeddings;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod neurons;
pub mod probes;
pub mod synthkit;
pub mod years;

pub use error::{Error, Result};
pub use matrix::{DistanceMatrix, MatrixMeta, SimilarityMatrix, YearGrid};
pub use metrics::{d_lev, d_log, d_ref, TheoreticalMetric, DEFAULT_REFERENCE};
pub use years::{Condition, PairMode, PairSet, StimulusTemplate, YearRange};
