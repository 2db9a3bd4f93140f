//! Grid-free delay-Doppler harmonic retrieval: signal model, synthetic
//! datasets, network preprocessing, cell label codec, maximum-likelihood
//! refinement with Cramér-Rao bounds, and periodogram/EDC baselines.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod labels;
pub mod matching;
pub mod preprocess;
pub mod refine;
pub mod signal;

pub use error::{Error, Result};
