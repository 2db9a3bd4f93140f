//! Multi-window 2D-DFT filtering and the complex-to-real channel maps that
//! form the network input.
//!
//! Transform convention: the frequency axis uses the positive-exponent
//! kernel and the time axis the negative-exponent kernel, both unnormalized
//! and without any shift. A path at `(tau, alpha)` therefore peaks at bin
//! `(tau * n_freq, alpha * n_time)`, the same coordinate frame as the labels.
//!
//! Tensor layout: channel-major, channel `4 * window + map` with maps ordered
//! real, imaginary, log-magnitude, phase; each channel is `n_freq x n_time`
//! row-major (row = delay bin, column = Doppler bin).

mod windows;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::{CMatrix, ChannelSnapshot, SamplingGrid};

pub use windows::{make_window, Window};

/// Floor added to magnitudes before the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Number of real maps applied to each windowed spectrum.
pub const MAPS_PER_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowBank {
    pub entries: Vec<Window>,
}

impl Default for WindowBank {
    fn default() -> Self {
        Self {
            entries: vec![
                Window::Tukey { taper: 0.5 },
                Window::Taylor {
                    nbar: 4,
                    sidelobe_db: 30.0,
                },
                Window::Chebyshev {
                    attenuation_db: 100.0,
                },
                Window::Blackman,
                Window::FlatTop,
                Window::Cosine,
                Window::Hann,
                Window::Rectangular,
            ],
        }
    }
}

impl WindowBank {
    pub const ORDER: [&'static str; 8] = [
        "tukey",
        "taylor",
        "chebyshev",
        "blackman",
        "flattop",
        "cosine",
        "hann",
        "rectangular",
    ];

    /// The bank must hold the eight windows in canonical order; shape
    /// parameters may differ from the defaults.
    pub fn validate(&self) -> Result<()> {
        let names: Vec<&str> = self.entries.iter().map(Window::name).collect();
        if names != Self::ORDER {
            return Err(invalid(format!(
                "window bank must be {:?}, got {names:?}",
                Self::ORDER
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        MAPS_PER_WINDOW * self.len()
    }
}

/// Real-valued network input.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedInput {
    pub channels: usize,
    pub n_freq: usize,
    pub n_time: usize,
    pub data: Vec<f32>,
}

impl PreprocessedInput {
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.n_freq + row) * self.n_time + col]
    }
}

/// Two-dimensional DFT in the crate convention, zero-padding the input to
/// `out_rows x out_cols`. Plans are cached per instance.
pub struct Dft2 {
    out_rows: usize,
    out_cols: usize,
    freq_plan: Arc<dyn Fft<f64>>,
    time_plan: Arc<dyn Fft<f64>>,
}

impl Dft2 {
    pub fn new(out_rows: usize, out_cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            out_rows,
            out_cols,
            freq_plan: planner.plan_fft_inverse(out_rows),
            time_plan: planner.plan_fft_forward(out_cols),
        }
    }

    /// Transforms `(w_f w_t^T) .* data`, zero-padded.
    pub fn transform(&self, data: &CMatrix, w_freq: &[f64], w_time: &[f64]) -> Result<CMatrix> {
        let (n_f, n_t) = (data.nrows(), data.ncols());
        if w_freq.len() != n_f || w_time.len() != n_t {
            return Err(invalid(format!(
                "window lengths ({}, {}) do not match data {}x{}",
                w_freq.len(),
                w_time.len(),
                n_f,
                n_t
            )));
        }
        if n_f > self.out_rows || n_t > self.out_cols {
            return Err(invalid("transform size smaller than the data"));
        }
        let mut out = CMatrix::zeros(self.out_rows, self.out_cols);
        // column-major storage: each column is contiguous along frequency
        for l in 0..n_t {
            let mut col = out.column_mut(l);
            for k in 0..n_f {
                col[k] = data[(k, l)] * (w_freq[k] * w_time[l]);
            }
            self.freq_plan.process(col.as_mut_slice());
        }
        let mut row = vec![Complex64::new(0.0, 0.0); self.out_cols];
        for m in 0..self.out_rows {
            for (n, z) in row.iter_mut().enumerate() {
                *z = out[(m, n)];
            }
            self.time_plan.process(&mut row);
            for (n, z) in row.iter().enumerate() {
                out[(m, n)] = *z;
            }
        }
        Ok(out)
    }
}

/// Precomputed windows and FFT plans for one grid size.
pub struct Preprocessor {
    bank: WindowBank,
    n_freq: usize,
    n_time: usize,
    windows: Vec<(Vec<f64>, Vec<f64>)>,
    dft: Dft2,
}

impl Preprocessor {
    pub fn new(bank: &WindowBank, grid: &SamplingGrid) -> Result<Self> {
        bank.validate()?;
        grid.validate()?;
        let windows = bank
            .entries
            .iter()
            .map(|w| Ok((w.samples(grid.n_freq)?, w.samples(grid.n_time)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bank: bank.clone(),
            n_freq: grid.n_freq,
            n_time: grid.n_time,
            windows,
            dft: Dft2::new(grid.n_freq, grid.n_time),
        })
    }

    pub fn bank(&self) -> &WindowBank {
        &self.bank
    }

    pub fn n_channels(&self) -> usize {
        self.bank.n_channels()
    }

    pub fn multi_window_dft(&self, data: &CMatrix) -> Result<Vec<CMatrix>> {
        if data.nrows() != self.n_freq || data.ncols() != self.n_time {
            return Err(invalid(format!(
                "snapshot is {}x{}, preprocessor expects {}x{}",
                data.nrows(),
                data.ncols(),
                self.n_freq,
                self.n_time
            )));
        }
        self.windows
            .iter()
            .map(|(wf, wt)| self.dft.transform(data, wf, wt))
            .collect()
    }

    pub fn run(&self, data: &CMatrix) -> Result<PreprocessedInput> {
        Ok(to_real_channels(&self.multi_window_dft(data)?))
    }

    /// Writes the input tensor for `data` into `out`, which must hold
    /// `n_channels * n_freq * n_time` values.
    pub fn run_into(&self, data: &CMatrix, out: &mut [f32]) -> Result<()> {
        let spectra = self.multi_window_dft(data)?;
        let plane = self.n_freq * self.n_time;
        if out.len() != spectra.len() * MAPS_PER_WINDOW * plane {
            return Err(invalid("output buffer has the wrong length"));
        }
        fill_channels(&spectra, out);
        Ok(())
    }
}

/// Multi-window 2D-DFT of a snapshot, one spectrum per bank entry.
pub fn multi_window_dft(snapshot: &ChannelSnapshot, bank: &WindowBank) -> Result<Vec<CMatrix>> {
    Preprocessor::new(bank, &snapshot.grid)?.multi_window_dft(&snapshot.data)
}

/// Applies the real, imaginary, log-magnitude and phase maps.
pub fn to_real_channels(spectra: &[CMatrix]) -> PreprocessedInput {
    let (n_freq, n_time) = spectra
        .first()
        .map(|s| (s.nrows(), s.ncols()))
        .unwrap_or((0, 0));
    let channels = spectra.len() * MAPS_PER_WINDOW;
    let mut data = vec![0f32; channels * n_freq * n_time];
    fill_channels(spectra, &mut data);
    PreprocessedInput {
        channels,
        n_freq,
        n_time,
        data,
    }
}

fn fill_channels(spectra: &[CMatrix], out: &mut [f32]) {
    for (w, spec) in spectra.iter().enumerate() {
        let (n_f, n_t) = (spec.nrows(), spec.ncols());
        let plane = n_f * n_t;
        let base = w * MAPS_PER_WINDOW * plane;
        for m in 0..n_f {
            for n in 0..n_t {
                let z = spec[(m, n)];
                let i = m * n_t + n;
                out[base + i] = z.re as f32;
                out[base + plane + i] = z.im as f32;
                out[base + 2 * plane + i] = (z.norm() + LOG_FLOOR).log10() as f32;
                out[base + 3 * plane + i] = phase(z) as f32;
            }
        }
    }
}

/// Argument in `(-pi, pi]`, zero for zero input.
fn phase(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}
