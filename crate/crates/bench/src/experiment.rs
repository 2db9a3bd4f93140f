//! Reduced-scale end-to-end run: train a small network, then compare it
//! with the periodogram and information-criterion baseline on held-out data.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gridfree_cnn::train::EpochRecord;
use gridfree_cnn::weights::{dataset_hash, load_weights, save_weights, WeightsMeta};
use gridfree_cnn::{train, CnnEstimator, NetworkConfig, TrainingSpec};
use gridfree_core::dataset::{generate_dataset, DatasetRecord, DatasetSpec};
use gridfree_core::estimate::Method;
use gridfree_core::signal::SamplingGrid;
use log::info;
use serde::{Deserialize, Serialize};

use crate::evaluate::{evaluate_run, run_method, EvalConfig};
use crate::report::{BenchReport, SnrBins};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskScale {
    pub size: usize,
    pub path_count: [usize; 2],
    pub train_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    /// SNR range of the training and validation sets.
    pub train_snr_db: [f64; 2],
    pub test_snr_db: [f64; 2],
    pub network: NetworkConfig,
    pub training: TrainingSpec,
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for DeskScale {
    fn default() -> Self {
        let p_max = 5;
        Self {
            size: 32,
            path_count: [1, p_max],
            train_count: 20_000,
            validation_count: 500,
            test_count: 500,
            // same population as the test set; the full 0-50 dB draw puts
            // only 1% of a 20k set above 20 dB
            train_snr_db: [20.0, 50.0],
            test_snr_db: [20.0, 50.0],
            network: NetworkConfig::reduced(32, 32, p_max),
            training: TrainingSpec {
                epochs: 10,
                seed: 1,
                regenerate_noise: true,
                ..TrainingSpec::default()
            },
            refine_iters: 10,
            seed: 2024,
        }
    }
}

impl DeskScale {
    fn spec(&self, count: usize, seed: u64, snr: [f64; 2]) -> anyhow::Result<DatasetSpec> {
        Ok(DatasetSpec {
            grid: SamplingGrid::normalized(self.size, self.size)?,
            path_count: self.path_count,
            snr_range_db: snr,
            count,
            seed,
            cell_grid: self.network.cell_grid,
            p_max: self.network.p_max,
            ..DatasetSpec::default()
        })
    }

    pub fn datasets(&self) -> anyhow::Result<[Vec<DatasetRecord>; 3]> {
        Ok([
            generate_dataset(&self.spec(self.train_count, self.seed, self.train_snr_db)?)?.records,
            generate_dataset(&self.spec(self.validation_count, self.seed + 1, self.train_snr_db)?)?.records,
            generate_dataset(&self.spec(self.test_count, self.seed + 2, self.test_snr_db)?)?.records,
        ])
    }

    pub fn eval_config(&self) -> EvalConfig {
        let mut cfg = EvalConfig {
            p_max: self.network.p_max,
            snr_bins: SnrBins::Edges(vec![self.test_snr_db[0], self.test_snr_db[1] + 1.0]),
            crb: false,
            ..EvalConfig::default()
        };
        cfg.refine.max_iters = self.refine_iters;
        cfg
    }
}

pub struct DeskOutcome {
    pub history: Vec<EpochRecord>,
    pub step_losses: Vec<f64>,
    pub train_seconds: f64,
    /// Share of test trials with `P_hat == P`.
    pub cnn_order_accuracy: f64,
    pub edc_order_accuracy: f64,
    pub report: BenchReport,
    pub weights: PathBuf,
}

impl DeskOutcome {
    fn row(&self, method: &str) -> Option<&crate::report::BenchRow> {
        self.report.rows_for(method).next()
    }

    /// Matched-pair MSE summed over delay and Doppler.
    pub fn mse(&self, method: &str) -> f64 {
        self.row(method).map_or(f64::NAN, |r| r.mse_tau + r.mse_alpha)
    }
}

fn order_accuracy(
    method: Method,
    test: &[DatasetRecord],
    cfg: &EvalConfig,
    mut cnn: Option<&mut CnnEstimator>,
) -> anyhow::Result<f64> {
    let mut hits = 0usize;
    for r in test {
        let est = run_method(method, &r.snapshot, cfg, cnn.as_deref_mut())?;
        hits += usize::from(est.p_hat() == r.truth().len());
    }
    Ok(hits as f64 / test.len().max(1) as f64)
}

/// Trains (or reuses weights cached in `cache_dir` for the same setup and
/// training data) and evaluates on the held-out set.
pub fn run_desk_scale(
    setup: &DeskScale,
    cache_dir: &Path,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> anyhow::Result<DeskOutcome> {
    let [train_set, validation, test] = setup.datasets()?;
    let hash = dataset_hash(&train_set);
    let setup_json = serde_json::to_string(setup)?;
    let tag = &gridfree_cnn::weights::sha256_hex(setup_json.as_bytes())[..16];
    std::fs::create_dir_all(cache_dir)?;
    let weights = cache_dir.join(format!("desk-{tag}.bin"));

    let (net, meta, train_seconds, step_losses) = match load_weights(&weights) {
        Ok((net, meta)) if meta.dataset_hash.as_deref() == Some(hash.as_str()) => {
            info!("reusing {}", weights.display());
            (net, meta, f64::NAN, Vec::new())
        }
        _ => {
            let start = Instant::now();
            let out = train(&setup.network, &train_set, &validation, &setup.training, |r| {
                on_epoch(r);
                ControlFlow::Continue(())
            })?;
            let secs = start.elapsed().as_secs_f64();
            let meta = WeightsMeta {
                training: Some(setup.training.clone()),
                dataset_hash: Some(hash.clone()),
                best_epoch: Some(out.best_epoch),
                history: out.history.clone(),
                ..WeightsMeta::untrained(&setup.network, &setup.training.input, setup.training.seed)
            };
            save_weights(&weights, &out.network, &meta)?;
            (out.network, meta, secs, out.step_losses)
        }
    };

    let cfg = setup.eval_config();
    let mut est = CnnEstimator::new(net, &meta.input, &test[0].snapshot.grid)?;
    let cnn_order_accuracy = order_accuracy(Method::Cnn, &test, &cfg, Some(&mut est))?;
    let edc_order_accuracy = order_accuracy(Method::Periodogram, &test, &cfg, None)?;
    let report = evaluate_run(
        &test,
        &[Method::Periodogram, Method::Cnn, Method::CnnGn],
        &cfg,
        Some(&mut est),
    )?;
    Ok(DeskOutcome {
        history: meta.history,
        step_losses,
        train_seconds,
        cnn_order_accuracy,
        edc_order_accuracy,
        report,
        weights,
    })
}
