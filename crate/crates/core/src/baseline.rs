//! Grid-limited periodogram peak search and EDC model-order selection.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{EstimationResult, Method};
use crate::preprocess::{Dft2, Window};
use crate::refine::{blue_weights, residual_power};
use crate::signal::{ChannelSnapshot, PathSet};

/// Real parameters per path counted by the EDC penalty.
pub const EDC_PARAMS_PER_PATH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodogramConfig {
    /// Zero-padding factor on both axes.
    pub oversample_factor: usize,
    pub window: Window,
    /// Residual powers below this fraction of the signal energy are clamped.
    pub rss_floor: f64,
}

impl Default for PeriodogramConfig {
    fn default() -> Self {
        Self {
            oversample_factor: 4,
            window: Window::Rectangular,
            rss_floor: 1e-15,
        }
    }
}

impl PeriodogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.oversample_factor == 0 {
            return Err(invalid("oversample_factor must be at least 1"));
        }
        if !(self.rss_floor > 0.0) {
            return Err(invalid("rss_floor must be positive"));
        }
        Ok(())
    }
}

/// One local maximum of the periodogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub power: f64,
}

/// `|DFT|^2` zero-padded to `O*N_f x O*N_t`.
pub fn periodogram(obs: &ChannelSnapshot, config: &PeriodogramConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let g = obs.grid;
    let o = config.oversample_factor;
    let wf = config.window.samples(g.n_freq)?;
    let wt = config.window.samples(g.n_time)?;
    let spec = Dft2::new(o * g.n_freq, o * g.n_time).transform(&obs.data, &wf, &wt)?;
    Ok(spec.map(|z| z.norm_sqr()))
}

/// Strict local maxima over the wrap-around 3x3 neighbourhood, strongest
/// first; equal powers are ordered by row-major index.
pub fn ranked_peaks(power: &DMatrix<f64>) -> Vec<Peak> {
    let (rows, cols) = power.shape();
    let mut peaks = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = power[(r, c)];
            let mut is_max = true;
            'n: for dr in [rows - 1, 0, 1] {
                for dc in [cols - 1, 0, 1] {
                    let (nr, nc) = ((r + dr) % rows, (c + dc) % cols);
                    if (nr, nc) != (r, c) && power[(nr, nc)] >= v {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                peaks.push(Peak { row: r, col: c, power: v });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.power
            .total_cmp(&a.power)
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
    peaks
}

fn peaks_to_positions(peaks: &[Peak], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    peaks
        .iter()
        .map(|p| (p.row as f64 / rows as f64, p.col as f64 / cols as f64))
        .unzip()
}

/// The `p` strongest periodogram peaks as on-grid estimates, weights by
/// least squares. Fewer peaks than requested sets `diagnostics.shortfall`.
pub fn periodogram_peak_search(
    obs: &ChannelSnapshot,
    p: usize,
    config: &PeriodogramConfig,
) -> Result<EstimationResult> {
    if p == 0 {
        return Err(invalid("periodogram_peak_search needs P >= 1"));
    }
    let start = Instant::now();
    let power = periodogram(obs, config)?;
    let peaks = ranked_peaks(&power);
    let take = p.min(peaks.len());
    let (taus, alphas) = peaks_to_positions(&peaks[..take], power.nrows(), power.ncols());
    let gammas = blue_weights(obs, &taus, &alphas)?;
    let mut out = EstimationResult::new(PathSet::new(gammas, taus, alphas)?, Method::Periodogram);
    out.diagnostics.shortfall = take < p;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// `sqrt(2M ln ln 2M)` for `M` complex samples.
pub fn edc_penalty_constant(m: usize) -> f64 {
    let n = 2.0 * m as f64;
    (n * n.ln().ln()).sqrt()
}

/// Criterion values for `p = 0..=p_max` along one ranked peak list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdcScores {
    pub rss: Vec<f64>,
    pub scores: Vec<f64>,
    pub p_hat: usize,
}

fn edc_from_peaks(
    obs: &ChannelSnapshot,
    peaks: &[Peak],
    shape: (usize, usize),
    p_max: usize,
    config: &PeriodogramConfig,
) -> Result<EdcScores> {
    let m = obs.grid.len();
    let two_m = 2.0 * m as f64;
    let c_m = edc_penalty_constant(m);
    let energy = obs.data.norm_squared();
    let floor = (config.rss_floor * energy).max(f64::MIN_POSITIVE);
    let limit = p_max.min(peaks.len());
    let (taus, alphas) = peaks_to_positions(&peaks[..limit], shape.0, shape.1);

    let mut rss = Vec::with_capacity(limit + 1);
    let mut scores = Vec::with_capacity(limit + 1);
    for p in 0..=limit {
        let r = match residual_power(obs, &taus[..p], &alphas[..p]) {
            Ok(per_sample) => (per_sample * m as f64).max(floor),
            // collinear peak sets cannot be fitted; never select them
            Err(Error::Degenerate { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        rss.push(r);
        scores.push(two_m * (r / two_m).ln() + (p * EDC_PARAMS_PER_PATH) as f64 * c_m);
    }
    let mut p_hat = 0;
    for (p, s) in scores.iter().enumerate() {
        if *s < scores[p_hat] {
            p_hat = p;
        }
    }
    Ok(EdcScores { rss, scores, p_hat })
}

/// Full EDC evaluation; `p_hat` is the smallest minimizer.
pub fn edc_scores(obs: &ChannelSnapshot, p_max: usize, config: &PeriodogramConfig) -> Result<EdcScores> {
    if p_max == 0 {
        return Err(invalid("p_max must be at least 1"));
    }
    let power = periodogram(obs, config)?;
    let peaks = ranked_peaks(&power);
    edc_from_peaks(obs, &peaks, power.shape(), p_max, config)
}

pub fn edc_model_order(obs: &ChannelSnapshot, p_max: usize, config: &PeriodogramConfig) -> Result<usize> {
    Ok(edc_scores(obs, p_max, config)?.p_hat)
}

/// EDC model order followed by peak search, sharing one periodogram.
pub fn periodogram_estimate(
    obs: &ChannelSnapshot,
    p_max: usize,
    config: &PeriodogramConfig,
) -> Result<EstimationResult> {
    if p_max == 0 {
        return Err(invalid("p_max must be at least 1"));
    }
    let start = Instant::now();
    let power = periodogram(obs, config)?;
    let peaks = ranked_peaks(&power);
    let edc = edc_from_peaks(obs, &peaks, power.shape(), p_max, config)?;
    let (taus, alphas) = peaks_to_positions(&peaks[..edc.p_hat], power.nrows(), power.ncols());
    let gammas = blue_weights(obs, &taus, &alphas)?;
    let mut out = EstimationResult::new(PathSet::new(gammas, taus, alphas)?, Method::Periodogram);
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{add_noise, synthesize, CMatrix, SamplingGrid};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(paths: &PathSet, n: usize, sigma2: f64, seed: u64) -> ChannelSnapshot {
        let g = SamplingGrid::normalized(n, n).unwrap();
        let s = synthesize(paths, &g).unwrap();
        ChannelSnapshot::new(add_noise(&s, sigma2, seed).unwrap(), g).unwrap()
    }

    fn one(tau: f64, alpha: f64) -> PathSet {
        PathSet::new(vec![Complex64::from_polar(1.0, 0.4)], vec![tau], vec![alpha]).unwrap()
    }

    #[test]
    fn on_bin_path_recovered_exactly() {
        let cfg = PeriodogramConfig::default();
        let truth = one(37.0 / 64.0, 5.0 / 64.0);
        let est = periodogram_peak_search(&obs(&truth, 16, 0.0, 0), 1, &cfg).unwrap();
        assert_eq!(est.paths.taus, truth.taus);
        assert_eq!(est.paths.alphas, truth.alphas);
        assert!((est.paths.gammas[0] - truth.gammas[0]).norm() < 1e-12);
        assert!(!est.diagnostics.shortfall);
    }

    #[test]
    fn error_bounded_by_half_bin() {
        let cfg = PeriodogramConfig::default();
        let n = 16;
        let bin = 1.0 / (4 * n) as f64;
        for i in 0..200 {
            let tau = (i as f64 + 0.5) * bin / 3.1 % 1.0;
            let alpha = 0.3 + 0.37 * bin;
            let est = periodogram_peak_search(&obs(&one(tau, alpha), n, 0.0, 0), 1, &cfg).unwrap();
            let d = crate::dataset::circular_distance(est.paths.taus[0], tau);
            assert!(d <= 0.5 * bin + 1e-12, "tau {tau}: {d}");
            let d = crate::dataset::circular_distance(est.paths.alphas[0], alpha);
            assert!(d <= 0.5 * bin + 1e-12);
        }
    }

    #[test]
    fn estimates_lie_on_oversampled_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = PeriodogramConfig {
            oversample_factor: 3,
            ..Default::default()
        };
        let truth = PathSet::new(
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)],
            vec![rng.random(), rng.random()],
            vec![rng.random(), rng.random()],
        )
        .unwrap();
        let est = periodogram_peak_search(&obs(&truth, 8, 0.01, 1), 2, &cfg).unwrap();
        for t in est.paths.taus.iter().chain(&est.paths.alphas) {
            let s = t * 24.0;
            assert!((s - s.round()).abs() < 1e-9);
            assert!((0.0..1.0).contains(t));
        }
    }

    #[test]
    fn flat_spectrum_reports_shortfall() {
        let g = SamplingGrid::normalized(8, 8).unwrap();
        let zero = ChannelSnapshot::new(CMatrix::zeros(8, 8), g).unwrap();
        let est = periodogram_peak_search(&zero, 3, &PeriodogramConfig::default()).unwrap();
        assert_eq!(est.p_hat(), 0);
        assert!(est.diagnostics.shortfall);
        assert_eq!(edc_model_order(&zero, 4, &PeriodogramConfig::default()).unwrap(), 0);
        assert!(periodogram_peak_search(&zero, 0, &PeriodogramConfig::default()).is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        let mut p = DMatrix::<f64>::zeros(6, 6);
        p[(4, 1)] = 2.0;
        p[(1, 4)] = 2.0;
        p[(3, 3)] = 5.0;
        let peaks = ranked_peaks(&p);
        let order: Vec<_> = peaks.iter().map(|q| (q.row, q.col)).collect();
        assert_eq!(order, vec![(3, 3), (1, 4), (4, 1)]);
    }

    #[test]
    fn wrap_neighbourhood_suppresses_edge_peaks() {
        let mut p = DMatrix::<f64>::zeros(6, 6);
        p[(0, 0)] = 1.0;
        p[(5, 5)] = 2.0;
        let peaks = ranked_peaks(&p);
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].row, peaks[0].col), (5, 5));
    }

    #[test]
    fn edc_picks_one_for_noiseless_single_path() {
        let truth = one(0.31, 0.77);
        let o = obs(&truth, 16, 0.0, 0);
        assert_eq!(edc_model_order(&o, 5, &PeriodogramConfig::default()).unwrap(), 1);
    }

    #[test]
    fn edc_penalty_strictly_increasing() {
        let truth = one(0.31, 0.77);
        let o = obs(&truth, 16, 0.1, 4);
        let s = edc_scores(&o, 8, &PeriodogramConfig::default()).unwrap();
        let two_m = 2.0 * 256.0;
        let pen: Vec<f64> = s
            .scores
            .iter()
            .zip(&s.rss)
            .map(|(v, r)| v - two_m * (r / two_m).ln())
            .collect();
        assert!(pen.windows(2).all(|w| w[1] > w[0]));
        assert!(s.rss.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn edc_constant_value() {
        // 2M = 2048: sqrt(2048 * ln(ln 2048))
        let want = (2048.0f64 * 2048.0f64.ln().ln()).sqrt();
        assert!((edc_penalty_constant(1024) - want).abs() < 1e-12);
        assert!((edc_penalty_constant(1024) - 64.500163).abs() < 1e-5);
    }

    #[test]
    fn combined_estimate_matches_separate_calls() {
        let truth = PathSet::new(
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.8)],
            vec![0.2, 0.7],
            vec![0.6, 0.1],
        )
        .unwrap();
        let o = obs(&truth, 16, 0.01, 9);
        let cfg = PeriodogramConfig::default();
        let est = periodogram_estimate(&o, 6, &cfg).unwrap();
        let p = edc_model_order(&o, 6, &cfg).unwrap();
        assert_eq!(p, 2);
        let sep = periodogram_peak_search(&o, p, &cfg).unwrap();
        assert_eq!(est.paths, sep.paths);
    }
}
