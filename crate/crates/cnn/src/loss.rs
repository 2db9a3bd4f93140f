//! Training losses with analytic gradients, evaluated in f64.
//!
//! `eta` vectors hold `(mu, dtau, dalpha)` triples per slot; `mu` is a raw
//! logit on the prediction side and 0/1 on the target side.

use gridfree_core::labels::sigmoid;
use serde::{Deserialize, Serialize};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Binary cross-entropy on logits, averaged over classes.
pub fn loss_model_order(logits: &[f64], target: &[f64]) -> f64 {
    model_order_bce(logits, target).0
}

fn model_order_bce(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), target.len(), "model-order lengths differ");
    let n = logits.len() as f64;
    let value = logits.iter().zip(target).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / n;
    let grad = logits.iter().zip(target).map(|(&z, &y)| (sigmoid(z) - y) / n).collect();
    (value, grad)
}

fn model_order_softmax(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), target.len(), "model-order lengths differ");
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    let mass: f64 = target.iter().sum();
    let value = target.iter().zip(logits).map(|(y, z)| y * (lse - z)).sum();
    let grad = logits
        .iter()
        .zip(target)
        .map(|(z, y)| mass * (z - lse).exp() - y)
        .collect();
    (value, grad)
}

/// Where the offset loss takes its per-slot weight from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// `sigmoid(mu_hat)`, the predicted detection score.
    #[default]
    Predicted,
    /// The 0/1 target occupancy.
    Target,
}

/// Sigmoid-gated offset loss summed over all slots:
/// `sum (g * (|dtau_hat - dtau| + |dalpha_hat - dalpha|))^2`.
pub fn loss_params(eta_pred: &[f64], eta_true: &[f64]) -> f64 {
    params_loss(eta_pred, eta_true, Gate::Predicted).0
}

fn params_loss(eta_pred: &[f64], eta_true: &[f64], gate: Gate) -> (f64, Vec<f64>) {
    assert_eq!(eta_pred.len(), eta_true.len(), "eta lengths differ");
    assert_eq!(eta_pred.len() % 3, 0, "eta must hold triples");
    let mut value = 0.0;
    let mut grad = vec![0.0; eta_pred.len()];
    for (s, (p, t)) in eta_pred.chunks_exact(3).zip(eta_true.chunks_exact(3)).enumerate() {
        let (et, ea) = (p[1] - t[1], p[2] - t[2]);
        let d = et.abs() + ea.abs();
        let g = match gate {
            Gate::Predicted => sigmoid(p[0]),
            Gate::Target => t[0],
        };
        value += (g * d).powi(2);
        let k = 2.0 * g * g * d;
        grad[3 * s + 1] = k * sign(et);
        grad[3 * s + 2] = k * sign(ea);
        if gate == Gate::Predicted {
            grad[3 * s] = 2.0 * g * d * d * g * (1.0 - g);
        }
    }
    (value, grad)
}

/// `L0 + beta * L1`.
pub fn loss_total(eta_pred: &[f64], eta_true: &[f64], rho_logits: &[f64], rho_true: &[f64], beta: f64) -> f64 {
    loss_model_order(rho_logits, rho_true) + beta * loss_params(eta_pred, eta_true)
}

/// Per-slot detection cross-entropy on the `mu` logits, summed over slots.
pub fn loss_detection(eta_pred: &[f64], eta_true: &[f64]) -> f64 {
    detection_loss(eta_pred, eta_true).0
}

fn detection_loss(eta_pred: &[f64], eta_true: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; eta_pred.len()];
    for s in 0..eta_pred.len() / 3 {
        let (z, y) = (eta_pred[3 * s], eta_true[3 * s]);
        value += softplus(z) - y * z;
        grad[3 * s] = sigmoid(z) - y;
    }
    (value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderLoss {
    /// Independent sigmoid outputs with binary cross-entropy.
    #[default]
    Sigmoid,
    /// Softmax with categorical cross-entropy.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the offset loss in `L0 + beta * L1`.
    pub beta: f64,
    /// Weight of the extra slot-detection term added to the training
    /// objective; zero trains on `L0 + beta * L1` alone.
    pub detection_weight: f64,
    pub gate: Gate,
    pub order_loss: OrderLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 4.0,
            detection_weight: 1.0,
            gate: Gate::Predicted,
            order_loss: OrderLoss::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub order: f64,
    pub params: f64,
    pub detection: f64,
    /// `order + beta * params`.
    pub total: f64,
    /// `total + detection_weight * detection`, the minimized quantity.
    pub objective: f64,
}

impl LossBreakdown {
    pub fn add_scaled(&mut self, other: &LossBreakdown, w: f64) {
        self.order += w * other.order;
        self.params += w * other.params;
        self.detection += w * other.detection;
        self.total += w * other.total;
        self.objective += w * other.objective;
    }

    pub fn scaled(mut self, w: f64) -> Self {
        let copy = self;
        self.add_scaled(&copy, w - 1.0);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.objective.is_finite() && self.total.is_finite()
    }
}

/// Objective for one sample and its gradients w.r.t. the raw outputs.
pub fn objective(
    eta_pred: &[f64],
    eta_true: &[f64],
    rho_logits: &[f64],
    rho_true: &[f64],
    cfg: &LossConfig,
) -> (LossBreakdown, Vec<f64>, Vec<f64>) {
    let (order, d_rho) = match cfg.order_loss {
        OrderLoss::Sigmoid => model_order_bce(rho_logits, rho_true),
        OrderLoss::Softmax => model_order_softmax(rho_logits, rho_true),
    };
    let (params, mut d_eta) = params_loss(eta_pred, eta_true, cfg.gate);
    d_eta.iter_mut().for_each(|g| *g *= cfg.beta);
    let (detection, d_det) = detection_loss(eta_pred, eta_true);
    if cfg.detection_weight > 0.0 {
        for (a, b) in d_eta.iter_mut().zip(d_det) {
            *a += cfg.detection_weight * b;
        }
    }
    let total = order + cfg.beta * params;
    let breakdown = LossBreakdown {
        order,
        params,
        detection,
        total,
        objective: total + cfg.detection_weight * detection,
    };
    (breakdown, d_eta, d_rho)
}
