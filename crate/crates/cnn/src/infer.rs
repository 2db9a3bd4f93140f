use std::path::Path;
use std::time::Instant;

use gridfree_core::estimate::{EstimationResult, Method};
use gridfree_core::labels::{decode_labels, DecodePolicy};
use gridfree_core::refine::blue_weights;
use gridfree_core::signal::{ChannelSnapshot, PathSet, SamplingGrid};
use gridfree_core::Error as CoreError;

use crate::error::{CnnError, Result};
use crate::input::{InputConfig, InputPipeline};
use crate::network::{Network, Output};
use crate::weights::load_weights;

/// Trained network plus the input pipeline it was trained with.
pub struct CnnEstimator {
    net: Network,
    pipe: InputPipeline,
    pub policy: DecodePolicy,
}

impl CnnEstimator {
    pub fn new(net: Network, input: &InputConfig, grid: &SamplingGrid) -> Result<Self> {
        let cfg = net.config();
        if (grid.n_freq, grid.n_time) != (cfg.n_freq, cfg.n_time) {
            return Err(CnnError::Shape(format!(
                "grid {}x{} does not match network input {}x{}",
                grid.n_freq, grid.n_time, cfg.n_freq, cfg.n_time
            )));
        }
        let pipe = InputPipeline::new(input, grid)?;
        if pipe.channels() != cfg.input_channels {
            return Err(CnnError::Shape("window bank does not match network input channels".into()));
        }
        Ok(Self {
            net,
            pipe,
            policy: DecodePolicy::default(),
        })
    }

    pub fn from_weights(path: &Path, grid: &SamplingGrid) -> Result<Self> {
        let (net, meta) = load_weights(path)?;
        Self::new(net, &meta.input, grid)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Raw network outputs for one snapshot.
    pub fn predict(&mut self, obs: &ChannelSnapshot) -> Result<Output> {
        let x = self.pipe.batch(std::iter::once(&obs.data))?;
        self.net.forward(x, false)
    }

    /// Decoded positions with least-squares weights.
    pub fn estimate(&mut self, obs: &ChannelSnapshot) -> Result<EstimationResult> {
        let start = Instant::now();
        let out = self.predict(obs)?;
        let eta: Vec<f64> = out.eta.iter().map(|&v| v as f64).collect();
        let rho: Vec<f64> = out.rho.iter().map(|&v| v as f64).collect();
        let pos = decode_labels(&eta, &rho, &self.net.config().cell_grid, self.policy)?;
        let (mut taus, mut alphas) = (pos.taus, pos.alphas);
        // slots that decode onto the same point cannot both be fitted
        let gammas = loop {
            match blue_weights(obs, &taus, &alphas) {
                Ok(g) => break g,
                Err(CoreError::Degenerate { second, .. }) if second < taus.len() => {
                    taus.remove(second);
                    alphas.remove(second);
                }
                Err(e) => return Err(e.into()),
            }
        };
        let mut res = EstimationResult::new(PathSet::new(gammas, taus, alphas)?, Method::Cnn);
        res.wall_time = start.elapsed().as_secs_f64();
        Ok(res)
    }
}

/// One-shot inference: preprocess, forward, decode, least squares.
pub fn infer(obs: &ChannelSnapshot, net: &Network, input: &InputConfig) -> Result<EstimationResult> {
    CnnEstimator::new(net.clone(), input, &obs.grid)?.estimate(obs)
}
