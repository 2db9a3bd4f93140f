//! Discrete delay-Doppler signal model.
//!
//! All parameters are normalized: delays and Doppler shifts live on the unit
//! interval and the sampling grid uses unit spacing unless configured
//! otherwise. A path with weight `gamma`, delay `tau` and Doppler `alpha`
//! contributes
//!
//! ```text
//! gamma * exp(-2j*pi*(k0 + k)*tau) * exp(+2j*pi*(l0 + l)*alpha)
//! ```
//!
//! to sample `(k, l)`, where `k0 = f0 / delta_f` and `l0 = t0 / delta_t`.
//! The default grid centers the frequency axis (`f0 = -n_freq * delta_f / 2`).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Complex observation matrix, rows indexed by frequency sample `k`,
/// columns by time sample `l`.
pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub n_freq: usize,
    pub n_time: usize,
    pub delta_f: f64,
    pub delta_t: f64,
    pub f0: f64,
    pub t0: f64,
}

impl SamplingGrid {
    /// Unit-spaced grid with a centered frequency axis and `t0 = 0`.
    pub fn normalized(n_freq: usize, n_time: usize) -> Result<Self> {
        let grid = Self {
            n_freq,
            n_time,
            delta_f: 1.0,
            delta_t: 1.0,
            f0: -(n_freq as f64) / 2.0,
            t0: 0.0,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_freq < 2 || self.n_time < 2 {
            return Err(invalid(format!(
                "grid needs at least 2x2 samples, got {}x{}",
                self.n_freq, self.n_time
            )));
        }
        if !(self.delta_f > 0.0 && self.delta_t > 0.0) {
            return Err(invalid("sampling intervals must be positive"));
        }
        if !(self.f0.is_finite() && self.t0.is_finite()) {
            return Err(invalid("grid offsets must be finite"));
        }
        Ok(())
    }

    /// Number of complex samples `n_freq * n_time`.
    pub fn len(&self) -> usize {
        self.n_freq * self.n_time
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bandwidth `n_freq * delta_f`.
    pub fn bandwidth(&self) -> f64 {
        self.n_freq as f64 * self.delta_f
    }

    pub fn freq(&self, k: usize) -> f64 {
        self.f0 + k as f64 * self.delta_f
    }

    pub fn time(&self, l: usize) -> f64 {
        self.t0 + l as f64 * self.delta_t
    }

    /// Frequency index offset `f0 / delta_f`.
    pub fn freq_offset(&self) -> f64 {
        self.f0 / self.delta_f
    }

    /// Time index offset `t0 / delta_t`.
    pub fn time_offset(&self) -> f64 {
        self.t0 / self.delta_t
    }

    /// Effective frequency index `k0 + k` multiplying the delay.
    pub fn freq_index(&self, k: usize) -> f64 {
        self.freq_offset() + k as f64
    }

    /// Effective time index `l0 + l` multiplying the Doppler shift.
    pub fn time_index(&self, l: usize) -> f64 {
        self.time_offset() + l as f64
    }

    /// Delay phasor `exp(-2j*pi*(k0 + k)*tau)` over all frequency samples.
    pub fn delay_phasor(&self, tau: f64) -> Vec<Complex64> {
        (0..self.n_freq)
            .map(|k| unit_phasor(-self.freq_index(k) * tau))
            .collect()
    }

    /// Doppler phasor `exp(+2j*pi*(l0 + l)*alpha)` over all time samples.
    pub fn doppler_phasor(&self, alpha: f64) -> Vec<Complex64> {
        (0..self.n_time)
            .map(|l| unit_phasor(self.time_index(l) * alpha))
            .collect()
    }
}

/// `exp(2j*pi*cycles)`, reducing the argument modulo one first so large
/// index products keep full precision.
pub fn unit_phasor(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, 2.0 * PI * frac)
}

/// Maps any real onto `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Complex weights, delays and Doppler shifts of a set of specular paths.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSet {
    pub gammas: Vec<Complex64>,
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl PathSet {
    pub fn new(gammas: Vec<Complex64>, taus: Vec<f64>, alphas: Vec<f64>) -> Result<Self> {
        let paths = Self {
            gammas,
            taus,
            alphas,
        };
        paths.validate()?;
        Ok(paths)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Checks equal lengths and that every delay and Doppler lies in `[0, 1)`.
    pub fn validate(&self) -> Result<()> {
        self.validate_lengths()?;
        for (p, (&tau, &alpha)) in self.taus.iter().zip(&self.alphas).enumerate() {
            if !(0.0..1.0).contains(&tau) || !(0.0..1.0).contains(&alpha) {
                return Err(invalid(format!(
                    "path {p}: (tau, alpha) = ({tau}, {alpha}) outside [0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but also rejects zero-magnitude weights.
    pub fn validate_truth(&self) -> Result<()> {
        self.validate()?;
        if let Some(p) = self.gammas.iter().position(|g| g.norm() == 0.0) {
            return Err(invalid(format!("path {p} has zero magnitude")));
        }
        Ok(())
    }

    fn validate_lengths(&self) -> Result<()> {
        if self.gammas.len() != self.taus.len() || self.taus.len() != self.alphas.len() {
            return Err(invalid(format!(
                "path arrays differ in length: gammas {}, taus {}, alphas {}",
                self.gammas.len(),
                self.taus.len(),
                self.alphas.len()
            )));
        }
        Ok(())
    }
}

/// One observation together with its sampling grid and, for synthetic data,
/// the noise variance and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub data: CMatrix,
    pub grid: SamplingGrid,
    pub sigma2: Option<f64>,
    pub truth: Option<PathSet>,
}

impl ChannelSnapshot {
    pub fn new(data: CMatrix, grid: SamplingGrid) -> Result<Self> {
        if data.nrows() != grid.n_freq || data.ncols() != grid.n_time {
            return Err(invalid(format!(
                "data is {}x{} but grid is {}x{}",
                data.nrows(),
                data.ncols(),
                grid.n_freq,
                grid.n_time
            )));
        }
        Ok(Self {
            data,
            grid,
            sigma2: None,
            truth: None,
        })
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(invalid(format!("noise variance must be >= 0, got {sigma2}")));
        }
        self.sigma2 = Some(sigma2);
        Ok(self)
    }

    pub fn with_truth(mut self, truth: PathSet) -> Self {
        self.truth = Some(truth);
        self
    }
}

/// Noiseless snapshot `S = sum_p gamma_p * d(tau_p) * v(alpha_p)^T`.
pub fn synthesize(paths: &PathSet, grid: &SamplingGrid) -> Result<CMatrix> {
    paths.validate_lengths()?;
    grid.validate()?;
    let mut s = CMatrix::zeros(grid.n_freq, grid.n_time);
    for ((&gamma, &tau), &alpha) in paths.gammas.iter().zip(&paths.taus).zip(&paths.alphas) {
        let d = grid.delay_phasor(tau);
        let v = grid.doppler_phasor(alpha);
        for (l, &vl) in v.iter().enumerate() {
            let gv = gamma * vl;
            for (k, &dk) in d.iter().enumerate() {
                s[(k, l)] += gv * dk;
            }
        }
    }
    Ok(s)
}

/// Column `p` is the column-major vectorization of the unit-weight path `p`,
/// i.e. row index `k + l * n_freq`.
pub fn steering_matrix(taus: &[f64], alphas: &[f64], grid: &SamplingGrid) -> Result<CMatrix> {
    if taus.len() != alphas.len() {
        return Err(invalid(format!(
            "taus ({}) and alphas ({}) differ in length",
            taus.len(),
            alphas.len()
        )));
    }
    grid.validate()?;
    let mut a = CMatrix::zeros(grid.len(), taus.len());
    for (p, (&tau, &alpha)) in taus.iter().zip(alphas).enumerate() {
        let d = grid.delay_phasor(tau);
        let v = grid.doppler_phasor(alpha);
        let mut col = a.column_mut(p);
        for (l, &vl) in v.iter().enumerate() {
            for (k, &dk) in d.iter().enumerate() {
                col[k + l * grid.n_freq] = dk * vl;
            }
        }
    }
    Ok(a)
}

/// Column-major vectorization of a snapshot, matching [`steering_matrix`] rows.
pub fn vectorize(data: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(data.as_slice())
}

/// Adds circular complex Gaussian noise with total per-entry variance `sigma2`.
pub fn add_noise(signal: &CMatrix, sigma2: f64, seed: u64) -> Result<CMatrix> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("noise variance must be >= 0, got {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(signal.clone());
    }
    let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = signal.clone();
    for z in y.iter_mut() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *z += Complex64::new(re, im);
    }
    Ok(y)
}

/// Mean signal power over all samples relative to the noise variance, in dB.
pub fn snr_db(signal: &CMatrix, sigma2: f64) -> Result<f64> {
    if sigma2 == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    if !(sigma2 > 0.0) {
        return Err(invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    let power = signal.norm_squared() / signal.len() as f64;
    Ok(10.0 * (power / sigma2).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid(n: usize) -> SamplingGrid {
        SamplingGrid::normalized(n, n).unwrap()
    }

    /// Direct evaluation of the model over physical sample positions.
    fn naive(paths: &PathSet, g: &SamplingGrid) -> CMatrix {
        let mut s = CMatrix::zeros(g.n_freq, g.n_time);
        for k in 0..g.n_freq {
            for l in 0..g.n_time {
                let fk = g.f0 + k as f64 * g.delta_f;
                let tl = g.t0 + l as f64 * g.delta_t;
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..paths.len() {
                    let tau_phys = paths.taus[p] / g.delta_f;
                    let alpha_phys = paths.alphas[p] / g.delta_t;
                    acc += paths.gammas[p]
                        * Complex64::from_polar(1.0, -2.0 * PI * fk * tau_phys)
                        * Complex64::from_polar(1.0, 2.0 * PI * tl * alpha_phys);
                }
                s[(k, l)] = acc;
            }
        }
        s
    }

    fn random_paths(rng: &mut impl Rng, p: usize) -> PathSet {
        PathSet::new(
            (0..p)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
            (0..p).map(|_| rng.random::<f64>()).collect(),
            (0..p).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_give_ones() {
        let g = grid(8);
        let p = PathSet::new(vec![Complex64::new(1.0, 0.0)], vec![0.0], vec![0.0]).unwrap();
        let s = synthesize(&p, &g).unwrap();
        assert!(s.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn empty_set_gives_zeros() {
        let s = synthesize(&PathSet::empty(), &grid(8)).unwrap();
        assert!(s.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_paths_match_naive() {
        let g = grid(8);
        let p = PathSet::new(
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)],
            vec![0.25, 0.75],
            vec![0.1, 0.6],
        )
        .unwrap();
        let s = synthesize(&p, &g).unwrap();
        let o = naive(&p, &g);
        assert!((s - &o).norm() / o.norm() < 1e-13);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let p = PathSet {
            gammas: vec![Complex64::new(1.0, 0.0)],
            taus: vec![0.1, 0.2],
            alphas: vec![0.1],
        };
        assert!(matches!(synthesize(&p, &grid(8)), Err(Error::InvalidInput(_))));
        assert!(PathSet::new(vec![], vec![0.1], vec![0.1]).is_err());
        assert!(PathSet::new(vec![Complex64::new(1.0, 0.0)], vec![1.0], vec![0.1]).is_err());
    }

    #[test]
    fn grid_invariants() {
        assert!(SamplingGrid::normalized(1, 8).is_err());
        let mut g = grid(8);
        g.delta_t = 0.0;
        assert!(g.validate().is_err());
        assert_eq!(grid(16).f0, -8.0);
        assert_eq!(grid(16).bandwidth(), 16.0);
    }

    #[test]
    fn steering_single_zero_path_is_ones() {
        let a = steering_matrix(&[0.0], &[0.0], &grid(4)).unwrap();
        assert_eq!(a.ncols(), 1);
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn steering_column_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid(16);
        let p = random_paths(&mut rng, 3);
        let a = steering_matrix(&p.taus, &p.alphas, &g).unwrap();
        for col in a.column_iter() {
            assert!((col.norm() - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_times_gamma_is_synthesis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = SamplingGrid::normalized(6, 10).unwrap();
        for p in 0..5 {
            let paths = random_paths(&mut rng, p);
            let a = steering_matrix(&paths.taus, &paths.alphas, &g).unwrap();
            let gam = DVector::from_vec(paths.gammas.clone());
            let lhs = a * gam;
            let rhs = vectorize(&synthesize(&paths, &g).unwrap());
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_zero_variance_is_identity() {
        let s = synthesize(
            &PathSet::new(vec![Complex64::new(0.3, 0.1)], vec![0.2], vec![0.7]).unwrap(),
            &grid(8),
        )
        .unwrap();
        assert_eq!(add_noise(&s, 0.0, 9).unwrap(), s);
    }

    #[test]
    fn noise_power_and_determinism() {
        let s = CMatrix::zeros(64, 64);
        let y = add_noise(&s, 1.0, 42).unwrap();
        let mean = y.norm_squared() / 4096.0;
        assert!((0.95..=1.05).contains(&mean), "mean {mean}");
        let re_var = y.iter().map(|z| z.re * z.re).sum::<f64>() / 4096.0;
        assert!((0.45..=0.55).contains(&re_var));
        assert_eq!(y, add_noise(&s, 1.0, 42).unwrap());
        assert_ne!(y, add_noise(&s, 1.0, 43).unwrap());
    }

    #[test]
    fn noise_negative_variance_rejected() {
        assert!(add_noise(&CMatrix::zeros(2, 2), -1.0, 0).is_err());
    }

    #[test]
    fn snr_examples() {
        let ones = CMatrix::from_element(8, 8, Complex64::new(1.0, 0.0));
        assert!(snr_db(&ones, 1.0).unwrap().abs() < 1e-12);
        assert!((snr_db(&ones, 0.1).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(snr_db(&ones, 0.0), Err(Error::UndefinedSnr)));
        let single = synthesize(
            &PathSet::new(vec![Complex64::from_polar(1.0, 0.4)], vec![0.37], vec![0.81]).unwrap(),
            &grid(8),
        )
        .unwrap();
        assert!(snr_db(&single, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn snapshot_shape_checked() {
        let g = grid(4);
        assert!(ChannelSnapshot::new(CMatrix::zeros(4, 5), g).is_err());
        let snap = ChannelSnapshot::new(CMatrix::zeros(4, 4), g).unwrap();
        assert!(snap.clone().with_sigma2(-0.1).is_err());
        assert_eq!(snap.with_sigma2(0.5).unwrap().sigma2, Some(0.5));
    }

    #[test]
    fn wrap_unit_range() {
        assert_eq!(wrap_unit(1.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(-1e-20), 0.0);
    }

    proptest! {
        #[test]
        fn synthesis_is_linear(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid(8);
            let p = random_paths(&mut rng, 3);
            let c = Complex64::new(re, im);
            let mut scaled = p.clone();
            scaled.gammas.iter_mut().for_each(|z| *z *= c);
            let lhs = synthesize(&scaled, &g).unwrap();
            let rhs = synthesize(&p, &g).unwrap() * c;
            prop_assert!((lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn unit_shift_is_invisible(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid(8);
            let p = random_paths(&mut rng, 2);
            let mut shifted = p.clone();
            shifted.taus[0] += 1.0;
            shifted.alphas[1] += 1.0;
            let a = synthesize(&p, &g).unwrap();
            let b = synthesize(&shifted, &g).unwrap();
            prop_assert!((a - b).norm() < 1e-12);
        }

        #[test]
        fn single_path_energy(tau in 0.0f64..1.0, alpha in 0.0f64..1.0, mag in 0.01f64..5.0) {
            let g = SamplingGrid::normalized(8, 12).unwrap();
            let p = PathSet::new(vec![Complex64::from_polar(mag, 1.0)], vec![tau], vec![alpha]).unwrap();
            let s = synthesize(&p, &g).unwrap();
            prop_assert!((s.norm_squared() - mag * mag * 96.0).abs() < 1e-10 * mag * mag * 96.0);
        }
    }

    #[test]
    fn matches_naive_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = grid(8);
        for _ in 0..100 {
            let p = rng.random_range(0..=5);
            let paths = random_paths(&mut rng, p);
            let s = synthesize(&paths, &g).unwrap();
            let o = naive(&paths, &g);
            let err = (s - &o).norm();
            assert!(err <= 1e-12 * o.norm().max(f64::MIN_POSITIVE));
        }
    }
}
