//! Gaussian likelihood machinery: least-squares weights, negative
//! log-likelihood, gradient and Fisher information, Gauss-Newton refinement
//! and Cramér-Rao bounds.
//!
//! The real parameter vector stores four entries per path,
//! `(Re gamma, Im gamma, tau, alpha)`, path after path.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::circular_distance;
use crate::error::{invalid, Error, Result};
use crate::estimate::EstimationResult;
use crate::signal::{steering_matrix, vectorize, wrap_unit, CMatrix, ChannelSnapshot, PathSet, SamplingGrid};

pub const PARAMS_PER_PATH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn from_paths(paths: &PathSet) -> Self {
        let mut v = Vec::with_capacity(PARAMS_PER_PATH * paths.len());
        for p in 0..paths.len() {
            v.extend_from_slice(&[
                paths.gammas[p].re,
                paths.gammas[p].im,
                paths.taus[p],
                paths.alphas[p],
            ]);
        }
        Theta(v)
    }

    pub fn n_paths(&self) -> usize {
        self.0.len() / PARAMS_PER_PATH
    }

    /// Converts back to a path set, wrapping delay and Doppler onto `[0, 1)`.
    pub fn to_paths(&self) -> PathSet {
        let mut paths = PathSet::empty();
        for c in self.0.chunks_exact(PARAMS_PER_PATH) {
            paths.gammas.push(Complex64::new(c[0], c[1]));
            paths.taus.push(wrap_unit(c[2]));
            paths.alphas.push(wrap_unit(c[3]));
        }
        paths
    }

    fn validate(&self) -> Result<()> {
        if self.0.len() % PARAMS_PER_PATH != 0 {
            return Err(invalid(format!(
                "parameter vector length {} is not a multiple of {PARAMS_PER_PATH}",
                self.0.len()
            )));
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameter vector has non-finite entries"));
        }
        Ok(())
    }

    fn parts(&self) -> (Vec<Complex64>, Vec<f64>, Vec<f64>) {
        let mut g = Vec::new();
        let mut t = Vec::new();
        let mut a = Vec::new();
        for c in self.0.chunks_exact(PARAMS_PER_PATH) {
            g.push(Complex64::new(c[0], c[1]));
            t.push(c[2]);
            a.push(c[3]);
        }
        (g, t, a)
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(())
}

fn closest_partner(taus: &[f64], alphas: &[f64], idx: usize) -> usize {
    (0..taus.len())
        .filter(|&j| j != idx)
        .min_by(|&a, &b| {
            let da = circular_distance(taus[a], taus[idx]).hypot(circular_distance(alphas[a], alphas[idx]));
            let db = circular_distance(taus[b], taus[idx]).hypot(circular_distance(alphas[b], alphas[idx]));
            da.total_cmp(&db)
        })
        .unwrap_or(idx)
}

/// Least-squares complex weights for fixed delays and Doppler shifts.
pub fn blue_weights(obs: &ChannelSnapshot, taus: &[f64], alphas: &[f64]) -> Result<Vec<Complex64>> {
    if taus.is_empty() {
        return Ok(Vec::new());
    }
    let a = steering_matrix(taus, alphas, &obs.grid)?;
    let p = a.ncols();
    if p > a.nrows() {
        return Err(invalid(format!("{p} paths exceed {} samples", a.nrows())));
    }
    let y = vectorize(&obs.data);
    let qr = a.qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    if let Some(i) = (0..p).find(|&i| r[(i, i)].norm() <= 1e-10 * scale) {
        let j = closest_partner(taus, alphas, i);
        return Err(Error::Degenerate {
            first: j.min(i),
            second: j.max(i),
        });
    }
    let qhy = qr.q().ad_mul(&y);
    let gam = r
        .solve_upper_triangular(&qhy)
        .ok_or(Error::Degenerate { first: 0, second: 0 })?;
    Ok(gam.iter().copied().collect())
}

/// `(1 / sigma2) * ||Y - S(theta)||_F^2`.
pub fn nll(theta: &Theta, obs: &ChannelSnapshot, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    theta.validate()?;
    let (g, t, a) = theta.parts();
    let s = steering_matrix(&t, &a, &obs.grid)? * DVector::from_vec(g);
    Ok((vectorize(&obs.data) - s).norm_squared() / sigma2)
}

/// Steering matrix and `d vec(S) / d theta` (columns in parameter order).
fn model_derivatives(theta: &Theta, grid: &SamplingGrid) -> Result<(CMatrix, CMatrix)> {
    let (g, t, a) = theta.parts();
    let steer = steering_matrix(&t, &a, grid)?;
    let m = grid.len();
    let mut d = CMatrix::zeros(m, PARAMS_PER_PATH * g.len());
    let j = Complex64::new(0.0, 1.0);
    for p in 0..g.len() {
        let dtau = g[p] * Complex64::new(0.0, -2.0 * PI);
        let dalpha = g[p] * Complex64::new(0.0, 2.0 * PI);
        for l in 0..grid.n_time {
            let li = grid.time_index(l);
            for k in 0..grid.n_freq {
                let row = k + l * grid.n_freq;
                let ap = steer[(row, p)];
                d[(row, 4 * p)] = ap;
                d[(row, 4 * p + 1)] = j * ap;
                d[(row, 4 * p + 2)] = dtau * grid.freq_index(k) * ap;
                d[(row, 4 * p + 3)] = dalpha * li * ap;
            }
        }
    }
    Ok((steer, d))
}

fn fisher_from(d: &CMatrix, sigma2: f64) -> DMatrix<f64> {
    let gram = d.ad_mul(d);
    let mut f = gram.map(|z| 2.0 * z.re / sigma2);
    // exact symmetry
    let n = f.nrows();
    for i in 0..n {
        for k in 0..i {
            let v = 0.5 * (f[(i, k)] + f[(k, i)]);
            f[(i, k)] = v;
            f[(k, i)] = v;
        }
    }
    f
}

/// Gradient of [`nll`] and the Fisher information `(2/sigma2) Re(D^H D)`.
pub fn jacobian_and_fisher(
    theta: &Theta,
    obs: &ChannelSnapshot,
    sigma2: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_sigma2(sigma2)?;
    theta.validate()?;
    let (steer, d) = model_derivatives(theta, &obs.grid)?;
    let (g, _, _) = theta.parts();
    let r = vectorize(&obs.data) - steer * DVector::from_vec(g);
    let dr = d.ad_mul(&r);
    let grad = dr.map(|z| -2.0 * z.re / sigma2);
    Ok((grad, fisher_from(&d, sigma2)))
}

/// Fisher information of the model at `paths`; independent of the data.
pub fn fisher_information(paths: &PathSet, grid: &SamplingGrid, sigma2: f64) -> Result<DMatrix<f64>> {
    check_sigma2(sigma2)?;
    let (_, d) = model_derivatives(&Theta::from_paths(paths), grid)?;
    Ok(fisher_from(&d, sigma2))
}

/// Diagonal of the inverse Fisher matrix at the true parameters, in
/// parameter order.
pub fn crb(paths: &PathSet, grid: &SamplingGrid, sigma2: f64) -> Result<Vec<f64>> {
    paths.validate()?;
    let f = fisher_information(paths, grid, sigma2)?;
    let n = f.nrows();
    let degenerate = || {
        let i = (0..paths.len()).next().unwrap_or(0);
        let j = closest_partner(&paths.taus, &paths.alphas, i);
        // report the globally closest pair
        let (mut a, mut b, mut best) = (i, j, f64::INFINITY);
        for x in 0..paths.len() {
            for y in 0..x {
                let d = circular_distance(paths.taus[x], paths.taus[y])
                    .hypot(circular_distance(paths.alphas[x], paths.alphas[y]));
                if d < best {
                    best = d;
                    a = y;
                    b = x;
                }
            }
        }
        Error::Degenerate { first: a, second: b }
    };
    let chol = f.clone().cholesky().ok_or_else(degenerate)?;
    let inv = chol.inverse();
    // reject numerically singular systems that still factor
    let cond_probe = (&f * &inv - DMatrix::<f64>::identity(n, n)).amax();
    if !cond_probe.is_finite() || cond_probe > 1e-3 {
        return Err(degenerate());
    }
    Ok((0..n).map(|i| inv[(i, i)]).collect())
}

/// Delay and Doppler bounds of every path, `(crb_tau, crb_alpha)`.
pub fn crb_tau_alpha(paths: &PathSet, grid: &SamplingGrid, sigma2: f64) -> Result<Vec<(f64, f64)>> {
    let bounds = crb(paths, grid, sigma2)?;
    Ok(bounds
        .chunks_exact(PARAMS_PER_PATH)
        .map(|c| (c[2], c[3]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub max_iters: usize,
    pub initial_step: f64,
    pub step_shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    pub min_step: f64,
    /// First ridge factor tried once the plain Fisher solve fails.
    pub ridge_start: f64,
    pub ridge_growth: f64,
    pub ridge_max: f64,
    /// Stop once the Gauss-Newton direction is shorter than this.
    pub tolerance: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            initial_step: 1.0,
            step_shrink: 0.5,
            sufficient_decrease: 1e-4,
            min_step: 1e-10,
            ridge_start: 1e-8,
            ridge_growth: 10.0,
            ridge_max: 1e8,
            tolerance: 1e-12,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.initial_step,
            self.step_shrink,
            self.sufficient_decrease,
            self.min_step,
            self.ridge_start,
            self.ridge_growth,
            self.ridge_max,
            self.tolerance,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.step_shrink >= 1.0 {
            return Err(invalid("refine config values must be positive, step_shrink < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub nll: f64,
    /// Accepted step length, zero when no step was taken.
    pub step: f64,
    pub z_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefineReport {
    pub initial_nll: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// False when the Fisher system stayed singular and the initial
    /// estimate was returned unchanged.
    pub refined: bool,
    pub sigma2: f64,
}

impl RefineReport {
    pub fn final_nll(&self) -> f64 {
        self.iterations
            .iter()
            .rev()
            .find(|r| r.step > 0.0)
            .map(|r| r.nll)
            .unwrap_or(self.initial_nll)
    }

    pub fn accepted_steps(&self) -> usize {
        self.iterations.iter().filter(|r| r.step > 0.0).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,nll,step,z_norm")?;
        writeln!(out, "0,{},0,", self.initial_nll)?;
        for r in &self.iterations {
            writeln!(out, "{},{},{},{}", r.iteration, r.nll, r.step, r.z_norm)?;
        }
        Ok(())
    }
}

/// Residual power per sample after fitting weights at fixed positions.
pub fn residual_power(obs: &ChannelSnapshot, taus: &[f64], alphas: &[f64]) -> Result<f64> {
    let y = vectorize(&obs.data);
    if taus.is_empty() {
        return Ok(y.norm_squared() / y.len() as f64);
    }
    let g = blue_weights(obs, taus, alphas)?;
    let s = steering_matrix(taus, alphas, &obs.grid)? * DVector::from_vec(g);
    Ok((y - s).norm_squared() / obs.grid.len() as f64)
}

fn solve_regularized(f: &DMatrix<f64>, grad: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let mut h = f.clone();
    if ridge > 0.0 {
        for i in 0..h.nrows() {
            let d = h[(i, i)];
            h[(i, i)] = d + ridge * d.abs().max(f64::MIN_POSITIVE);
        }
    }
    let z = h.cholesky()?.solve(grad);
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// Fisher-scoring iteration `theta <- theta - eps * F^-1 J` from `init`.
///
/// Missing weights in `init` are filled by least squares. When `sigma2` is
/// `None` it is estimated from the least-squares residual at the initial
/// positions; it only scales the diagnostics, not the direction.
pub fn gauss_newton_refine(
    init: &EstimationResult,
    obs: &ChannelSnapshot,
    sigma2: Option<f64>,
    config: &RefineConfig,
) -> Result<EstimationResult> {
    config.validate()?;
    let start = Instant::now();
    let mut paths = init.paths.clone();
    if paths.is_empty() {
        return Err(invalid("refinement needs at least one path"));
    }
    for t in paths.taus.iter_mut().chain(paths.alphas.iter_mut()) {
        *t = wrap_unit(*t);
    }
    let degenerate = match blue_weights(obs, &paths.taus, &paths.alphas) {
        Ok(g) => {
            if paths.gammas.len() != paths.len() {
                paths.gammas = g;
            }
            false
        }
        Err(Error::Degenerate { .. }) if paths.gammas.len() == paths.len() => true,
        Err(e) => return Err(e),
    };
    paths.validate()?;
    if degenerate {
        // coincident components: the Fisher system has no unique solution
        let mut out = init.clone();
        out.paths = paths;
        out.wall_time = init.wall_time + start.elapsed().as_secs_f64();
        out.diagnostics.refine = Some(RefineReport {
            initial_nll: f64::NAN,
            sigma2: sigma2.unwrap_or(f64::NAN),
            ..Default::default()
        });
        return Ok(out);
    }
    let sigma2 = match sigma2 {
        Some(s) => {
            check_sigma2(s)?;
            s
        }
        None => {
            let r = residual_power(obs, &paths.taus, &paths.alphas)?;
            if r > 0.0 {
                r
            } else {
                1.0
            }
        }
    };

    let mut theta = Theta::from_paths(&paths);
    let mut current = nll(&theta, obs, sigma2)?;
    if !current.is_finite() {
        return Err(invalid("initial negative log-likelihood is not finite"));
    }
    let mut report = RefineReport {
        initial_nll: current,
        refined: true,
        sigma2,
        ..Default::default()
    };
    let mut ridge = 0.0;

    'outer: for iteration in 1..=config.max_iters {
        let (grad, fisher) = jacobian_and_fisher(&theta, obs, sigma2)?;
        loop {
            let z = match solve_regularized(&fisher, &grad, ridge) {
                Some(z) => z,
                None => {
                    ridge = next_ridge(ridge, config);
                    if ridge > config.ridge_max {
                        if report.accepted_steps() == 0 {
                            report.refined = false;
                            theta = Theta::from_paths(&paths);
                        }
                        break 'outer;
                    }
                    continue;
                }
            };
            let z_norm = z.norm();
            let slope = grad.dot(&z);
            if z_norm < config.tolerance || slope <= 1e-14 * current.abs().max(1.0) {
                report.iterations.push(IterationRecord {
                    iteration,
                    nll: current,
                    step: 0.0,
                    z_norm,
                });
                report.converged = true;
                break 'outer;
            }

            let mut step = config.initial_step;
            while step >= config.min_step {
                let cand = Theta(
                    theta
                        .0
                        .iter()
                        .zip(z.iter())
                        .enumerate()
                        .map(|(i, (v, dz))| {
                            let u = v - step * dz;
                            if i % PARAMS_PER_PATH >= 2 {
                                wrap_unit(u)
                            } else {
                                u
                            }
                        })
                        .collect(),
                );
                let value = match nll(&cand, obs, sigma2) {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        step *= config.step_shrink;
                        continue;
                    }
                };
                if value <= current - config.sufficient_decrease * step * slope {
                    theta = cand;
                    current = value;
                    report.iterations.push(IterationRecord {
                        iteration,
                        nll: value,
                        step,
                        z_norm,
                    });
                    ridge = if ridge > config.ridge_start { ridge / config.ridge_growth } else { 0.0 };
                    continue 'outer;
                }
                step *= config.step_shrink;
            }

            // no acceptable step along this direction: damp and retry
            ridge = next_ridge(ridge, config);
            if ridge > config.ridge_max {
                report.iterations.push(IterationRecord {
                    iteration,
                    nll: current,
                    step: 0.0,
                    z_norm,
                });
                report.converged = true;
                break 'outer;
            }
        }
    }

    let mut out = init.clone();
    out.paths = theta.to_paths();
    out.wall_time = init.wall_time + start.elapsed().as_secs_f64();
    out.diagnostics.refine = Some(report);
    Ok(out)
}

fn next_ridge(ridge: f64, config: &RefineConfig) -> f64 {
    if ridge == 0.0 {
        config.ridge_start
    } else {
        ridge * config.ridge_growth
    }
}
