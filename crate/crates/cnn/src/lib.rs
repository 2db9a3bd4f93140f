//! Cell-regression CNN for grid-free delay-Doppler estimation.
//!
//! The network reads the multi-window spectra of a snapshot and predicts a
//! per-cell encoding of path positions plus the model order. Everything runs
//! on a small f32 engine in [`layers`].

pub mod error;
pub mod infer;
pub mod input;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod train;
pub mod weights;

pub use error::{CnnError, Result};
pub use infer::{infer, CnnEstimator};
pub use input::{InputConfig, InputPipeline};
pub use network::{Network, NetworkConfig, Output};
pub use train::{train, TrainOutcome, TrainingSpec};
