use gridfree_core::preprocess::{Preprocessor, WindowBank};
use gridfree_core::signal::{CMatrix, SamplingGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layers::{Activation, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub bank: WindowBank,
    /// Scale each snapshot to unit mean power and the transform to unit
    /// gain before the real maps are taken.
    pub normalize: bool,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            bank: WindowBank::default(),
            normalize: true,
        }
    }
}

/// Snapshot to network-input conversion.
pub struct InputPipeline {
    config: InputConfig,
    pre: Preprocessor,
    grid: SamplingGrid,
}

impl InputPipeline {
    pub fn new(config: &InputConfig, grid: &SamplingGrid) -> Result<Self> {
        Ok(Self {
            config: config.clone(),
            pre: Preprocessor::new(&config.bank, grid)?,
            grid: *grid,
        })
    }

    pub fn config(&self) -> &InputConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.pre.n_channels()
    }

    pub fn sample_len(&self) -> usize {
        self.channels() * self.grid.len()
    }

    pub fn fill(&self, data: &CMatrix, out: &mut [f32]) -> Result<()> {
        if self.config.normalize {
            let m = data.len() as f64;
            let rms = (data.norm_squared() / m).sqrt();
            let scale = if rms > 0.0 { 1.0 / (rms * m.sqrt()) } else { 1.0 };
            let scaled = data * Complex64::new(scale, 0.0);
            self.pre.run_into(&scaled, out)?;
        } else {
            self.pre.run_into(data, out)?;
        }
        Ok(())
    }

    pub fn batch<'a>(&self, items: impl ExactSizeIterator<Item = &'a CMatrix>) -> Result<Activation> {
        let n = items.len();
        let len = self.sample_len();
        let mut x = Activation::zeros(Shape::new(n, self.channels(), self.grid.n_freq, self.grid.n_time));
        for (i, d) in items.enumerate() {
            self.fill(d, &mut x.data[i * len..(i + 1) * len])?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridfree_core::signal::{synthesize, PathSet};

    #[test]
    fn normalization_removes_scale() {
        let grid = SamplingGrid::normalized(16, 16).unwrap();
        let p = PathSet::new(vec![Complex64::new(0.3, 0.1)], vec![0.2], vec![0.7]).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        let pipe = InputPipeline::new(&InputConfig::default(), &grid).unwrap();
        let mut a = vec![0.0; pipe.sample_len()];
        let mut b = vec![0.0; pipe.sample_len()];
        pipe.fill(&s, &mut a).unwrap();
        pipe.fill(&(&s * Complex64::new(1e3, 0.0)), &mut b).unwrap();
        let plane = grid.len();
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            let (ch, at) = (i / plane, i % plane);
            // phase of a numerically zero bin is arbitrary
            if ch % 4 == 3 && a[(ch - 1) * plane + at] < -8.0 {
                continue;
            }
            assert!((x - y).abs() < 1e-4 * x.abs().max(1.0), "{x} vs {y} at {i}");
        }
        let z = CMatrix::zeros(16, 16);
        pipe.fill(&z, &mut a).unwrap();
        assert!(a.iter().all(|v| v.is_finite()));
    }
}
