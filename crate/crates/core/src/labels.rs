//! Cell-relative label encoding.
//!
//! The unit square of normalized `(tau, alpha)` is split into `rows x cols`
//! equal cells. Each cell carries `capacity` slots of `(mu, dtau, dalpha)`,
//! where `mu` flags an occupied slot and the offsets are within-cell
//! coordinates (`0.5` is the centroid). Occupied slots come first, sorted by
//! descending path magnitude; empty slots are all-zero.
//!
//! Flat layout of `eta`: cell-major (`row * cols + col`), then slot, then the
//! triple `(mu, dtau, dalpha)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::PathSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellGrid {
    /// Cells along the delay axis.
    pub rows: usize,
    /// Cells along the Doppler axis.
    pub cols: usize,
    /// Maximum number of paths per cell.
    pub capacity: usize,
}

impl Default for CellGrid {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            capacity: 3,
        }
    }
}

impl CellGrid {
    pub fn new(rows: usize, cols: usize, capacity: usize) -> Result<Self> {
        let grid = Self {
            rows,
            cols,
            capacity,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.capacity == 0 {
            return Err(invalid(format!(
                "cell grid dimensions must be >= 1, got {}x{}x{}",
                self.rows, self.cols, self.capacity
            )));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_slots(&self) -> usize {
        self.n_cells() * self.capacity
    }

    /// Length of the flattened `eta` array.
    pub fn eta_len(&self) -> usize {
        3 * self.n_slots()
    }

    pub fn cell_width(&self) -> (f64, f64) {
        (1.0 / self.rows as f64, 1.0 / self.cols as f64)
    }

    pub fn centroid(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (row as f64 + 0.5) / self.rows as f64,
            (col as f64 + 0.5) / self.cols as f64,
        )
    }

    /// Flat index of the `mu` entry of slot `slot` in cell `(row, col)`.
    pub fn slot_offset(&self, row: usize, col: usize, slot: usize) -> usize {
        3 * ((row * self.cols + col) * self.capacity + slot)
    }

    /// Nearest centroid in the Euclidean sense; ties go to the smaller
    /// `(row, col)`.
    pub fn assign_cell(&self, tau: f64, alpha: f64) -> Result<(usize, usize)> {
        if !(0.0..1.0).contains(&tau) || !(0.0..1.0).contains(&alpha) {
            return Err(invalid(format!(
                "(tau, alpha) = ({tau}, {alpha}) outside [0, 1)"
            )));
        }
        let mut best = (0, 0);
        let mut best_d2 = f64::INFINITY;
        for row in 0..self.rows {
            for col in 0..self.cols {
                let (ct, ca) = self.centroid(row, col);
                let d2 = (tau - ct).powi(2) + (alpha - ca).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = (row, col);
                }
            }
        }
        Ok(best)
    }

    /// Within-cell coordinates of a point relative to cell `(row, col)`.
    pub fn to_offsets(&self, row: usize, col: usize, tau: f64, alpha: f64) -> (f64, f64) {
        (
            tau * self.rows as f64 - row as f64,
            alpha * self.cols as f64 - col as f64,
        )
    }

    /// Inverse of [`to_offsets`](Self::to_offsets) with offsets clamped to `[0, 1]`.
    pub fn from_offsets(&self, row: usize, col: usize, dtau: f64, dalpha: f64) -> (f64, f64) {
        let (wt, wa) = self.cell_width();
        (
            (row as f64 + dtau.clamp(0.0, 1.0)) * wt,
            (col as f64 + dalpha.clamp(0.0, 1.0)) * wa,
        )
    }

    /// Number of paths of `paths` falling into each cell, cell-major.
    pub fn occupancy(&self, taus: &[f64], alphas: &[f64]) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; self.n_cells()];
        for (&t, &a) in taus.iter().zip(alphas) {
            let (r, c) = self.assign_cell(t, a)?;
            counts[r * self.cols + c] += 1;
        }
        Ok(counts)
    }
}

/// Encoded targets for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTensor {
    pub grid: CellGrid,
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
}

impl LabelTensor {
    pub fn p_max(&self) -> usize {
        self.rho.len()
    }

    pub fn model_order(&self) -> usize {
        argmax(&self.rho) + 1
    }
}

/// Encodes a path set into `(eta, rho)`.
pub fn encode_labels(paths: &PathSet, grid: &CellGrid, p_max: usize) -> Result<LabelTensor> {
    grid.validate()?;
    paths.validate()?;
    let p = paths.len();
    if p == 0 {
        return Err(invalid("cannot encode an empty path set"));
    }
    if p > p_max {
        return Err(invalid(format!("{p} paths exceed p_max = {p_max}")));
    }

    let mut per_cell: Vec<Vec<usize>> = vec![Vec::new(); grid.n_cells()];
    for idx in 0..p {
        let (r, c) = grid.assign_cell(paths.taus[idx], paths.alphas[idx])?;
        per_cell[r * grid.cols + c].push(idx);
    }

    let mut eta = vec![0.0; grid.eta_len()];
    for (cell, members) in per_cell.iter_mut().enumerate() {
        let (row, col) = (cell / grid.cols, cell % grid.cols);
        if members.len() > grid.capacity {
            return Err(Error::CellCapacity {
                row,
                col,
                capacity: grid.capacity,
            });
        }
        members.sort_by(|&a, &b| {
            paths.gammas[b]
                .norm()
                .total_cmp(&paths.gammas[a].norm())
                .then(paths.taus[a].total_cmp(&paths.taus[b]))
                .then(paths.alphas[a].total_cmp(&paths.alphas[b]))
        });
        for (slot, &idx) in members.iter().enumerate() {
            let (dt, da) = grid.to_offsets(row, col, paths.taus[idx], paths.alphas[idx]);
            let o = grid.slot_offset(row, col, slot);
            eta[o] = 1.0;
            eta[o + 1] = dt;
            eta[o + 2] = da;
        }
    }

    let mut rho = vec![0.0; p_max];
    rho[p - 1] = 1.0;
    Ok(LabelTensor {
        grid: *grid,
        eta,
        rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodePolicy {
    /// Keep the `P_hat` slots with the highest detection score, where `P_hat`
    /// comes from the model-order head.
    #[default]
    TopModelOrder,
    /// Keep every slot whose detection score exceeds 0.5.
    Threshold,
}

/// Decoded positions; weights are estimated separately.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Positions {
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Positions {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Decodes raw network outputs (or labels) into positions.
pub fn decode_labels(
    eta_pred: &[f64],
    rho_pred: &[f64],
    grid: &CellGrid,
    policy: DecodePolicy,
) -> Result<Positions> {
    if eta_pred.len() != grid.eta_len() {
        return Err(invalid(format!(
            "eta has {} entries, grid expects {}",
            eta_pred.len(),
            grid.eta_len()
        )));
    }
    if rho_pred.is_empty() {
        return Err(invalid("empty model-order vector"));
    }

    let mut scored: Vec<(usize, f64)> = (0..grid.n_slots())
        .map(|s| (s, sigmoid(eta_pred[3 * s])))
        .collect();
    // stable sort keeps slot order among equal scores
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));

    let keep = match policy {
        DecodePolicy::TopModelOrder => (argmax(rho_pred) + 1).min(scored.len()),
        DecodePolicy::Threshold => scored.iter().take_while(|(_, s)| *s > 0.5).count(),
    };

    let mut out = Positions::default();
    for &(slot, _) in &scored[..keep] {
        let cell = slot / grid.capacity;
        let (row, col) = (cell / grid.cols, cell % grid.cols);
        let (t, a) = grid.from_offsets(row, col, eta_pred[3 * slot + 1], eta_pred[3 * slot + 2]);
        // the right/top cell edge maps to 1.0, which wraps onto 0
        out.taus.push(crate::signal::wrap_unit(t));
        out.alphas.push(crate::signal::wrap_unit(a));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paths(mags: &[f64], taus: &[f64], alphas: &[f64]) -> PathSet {
        PathSet::new(
            mags.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            taus.to_vec(),
            alphas.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn centroid_maps_to_its_cell() {
        let g = CellGrid::default();
        assert_eq!(g.assign_cell(0.0625, 0.0625).unwrap(), (0, 0));
        assert_eq!(g.assign_cell(0.0, 0.0).unwrap(), (0, 0));
    }

    #[test]
    fn nearest_centroid_equals_containing_cell() {
        let g = CellGrid::new(8, 6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let t: f64 = rng.random();
            let a: f64 = rng.random();
            let expect = ((t * 8.0).floor() as usize, (a * 6.0).floor() as usize);
            assert_eq!(g.assign_cell(t, a).unwrap(), expect);
        }
    }

    #[test]
    fn ties_go_to_smaller_index() {
        let g = CellGrid::default();
        // 0.25 sits on the edge between rows 1 and 2
        assert_eq!(g.assign_cell(0.25, 0.0625).unwrap(), (1, 0));
        assert_eq!(g.assign_cell(0.0625, 0.5).unwrap(), (0, 3));
    }

    #[test]
    fn out_of_range_rejected() {
        let g = CellGrid::default();
        assert!(g.assign_cell(1.0, 0.5).is_err());
        assert!(g.assign_cell(0.5, -0.1).is_err());
    }

    #[test]
    fn single_centroid_path() {
        let g = CellGrid::default();
        let (t, a) = g.centroid(2, 5);
        let lab = encode_labels(&paths(&[1.0], &[t], &[a]), &g, 20).unwrap();
        let o = g.slot_offset(2, 5, 0);
        assert_eq!(&lab.eta[o..o + 3], &[1.0, 0.5, 0.5]);
        assert_eq!(lab.eta.iter().filter(|&&v| v != 0.0).count(), 3);
        assert_eq!(lab.rho[0], 1.0);
        assert_eq!(lab.rho.iter().sum::<f64>(), 1.0);
        assert_eq!(lab.model_order(), 1);
    }

    #[test]
    fn slots_sorted_by_descending_magnitude() {
        let g = CellGrid::default();
        let lab = encode_labels(&paths(&[0.2, 0.9], &[0.01, 0.02], &[0.03, 0.04]), &g, 20).unwrap();
        let o = g.slot_offset(0, 0, 0);
        // slot 1 holds the stronger second path
        assert!((lab.eta[o + 1] - 0.16).abs() < 1e-12);
        assert!((lab.eta[o + 4] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn occupied_triples_precede_padding() {
        let g = CellGrid::default();
        let lab = encode_labels(
            &paths(&[0.5, 0.7, 0.1], &[0.01, 0.02, 0.3], &[0.03, 0.04, 0.9]),
            &g,
            20,
        )
        .unwrap();
        let o = g.slot_offset(0, 0, 0);
        let cell = &lab.eta[o..o + 9];
        assert_eq!(cell[0], 1.0);
        assert_eq!(cell[3], 1.0);
        assert_eq!(&cell[6..9], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn capacity_and_order_errors() {
        let g = CellGrid::new(2, 2, 1).unwrap();
        let err = encode_labels(&paths(&[1.0, 1.0], &[0.1, 0.2], &[0.1, 0.2]), &g, 20).unwrap_err();
        assert!(matches!(err, Error::CellCapacity { row: 0, col: 0, .. }));
        let err = encode_labels(&paths(&[1.0, 1.0], &[0.1, 0.7], &[0.1, 0.7]), &g, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn encoding_ignores_input_order() {
        let g = CellGrid::default();
        let a = paths(&[0.5, 0.5, 0.9], &[0.01, 0.02, 0.6], &[0.03, 0.01, 0.2]);
        let b = paths(&[0.9, 0.5, 0.5], &[0.6, 0.02, 0.01], &[0.2, 0.01, 0.03]);
        assert_eq!(encode_labels(&a, &g, 5).unwrap(), encode_labels(&b, &g, 5).unwrap());
    }

    #[test]
    fn decode_single_hot_slot() {
        let g = CellGrid::default();
        let mut eta = vec![0.0; g.eta_len()];
        for s in 0..g.n_slots() {
            eta[3 * s] = -10.0;
        }
        let o = g.slot_offset(4, 1, 2);
        eta[o] = 10.0;
        eta[o + 1] = 0.25;
        eta[o + 2] = 0.75;
        let mut rho = vec![0.0; 20];
        rho[0] = 1.0;
        let pos = decode_labels(&eta, &rho, &g, DecodePolicy::TopModelOrder).unwrap();
        assert_eq!(pos.len(), 1);
        assert!((pos.taus[0] - (4.25 / 8.0)).abs() < 1e-15);
        assert!((pos.alphas[0] - (1.75 / 8.0)).abs() < 1e-15);
        let thr = decode_labels(&eta, &rho, &g, DecodePolicy::Threshold).unwrap();
        assert_eq!(thr, pos);
    }

    #[test]
    fn decode_clamps_offsets() {
        let g = CellGrid::new(2, 2, 1).unwrap();
        let mut eta = vec![-5.0; g.eta_len()];
        eta[0] = 5.0;
        eta[1] = -0.3;
        eta[2] = 0.6;
        let pos = decode_labels(&eta, &[1.0], &g, DecodePolicy::TopModelOrder).unwrap();
        assert_eq!(pos.taus[0], 0.0);
        assert!((pos.alphas[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn decode_shape_checked() {
        let g = CellGrid::default();
        assert!(decode_labels(&[0.0; 5], &[1.0], &g, DecodePolicy::Threshold).is_err());
    }

    #[test]
    fn zero_slots_are_exactly_zero() {
        let g = CellGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PathSet::new(
            (0..10).map(|_| Complex64::new(rng.random(), 0.0)).collect(),
            (0..10).map(|i| (i as f64 + rng.random::<f64>()) / 10.0).collect(),
            (0..10).map(|_| rng.random()).collect(),
        )
        .unwrap();
        let lab = encode_labels(&p, &g, 20).unwrap();
        for s in 0..g.n_slots() {
            if lab.eta[3 * s] == 0.0 {
                assert_eq!(lab.eta[3 * s + 1], 0.0);
                assert_eq!(lab.eta[3 * s + 2], 0.0);
            } else {
                assert!((0.0..1.0).contains(&lab.eta[3 * s + 1]));
                assert!((0.0..1.0).contains(&lab.eta[3 * s + 2]));
            }
        }
    }
}
