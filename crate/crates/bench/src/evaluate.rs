use anyhow::Context;
use gridfree_cnn::CnnEstimator;
use gridfree_core::baseline::{periodogram_estimate, PeriodogramConfig};
use gridfree_core::dataset::DatasetRecord;
use gridfree_core::estimate::{EstimationResult, Method};
use gridfree_core::matching::{match_paths, DEFAULT_GATE};
use gridfree_core::refine::{crb_tau_alpha, gauss_newton_refine, RefineConfig};
use gridfree_core::signal::{ChannelSnapshot, PathSet};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::report::{BenchReport, ReportBuilder, SnrBins};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub periodogram: PeriodogramConfig,
    /// Largest model order the information criterion may choose.
    pub p_max: usize,
    pub refine: RefineConfig,
    /// Wrapped distance beyond which an estimate is not paired with a path.
    pub gate: f64,
    pub snr_bins: SnrBins,
    /// Emit bound rows computed at the true parameters.
    pub crb: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            periodogram: PeriodogramConfig::default(),
            p_max: 20,
            refine: RefineConfig::default(),
            gate: DEFAULT_GATE,
            snr_bins: SnrBins::default(),
            crb: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.periodogram.validate()?;
        self.refine.validate()?;
        self.snr_bins.validate()?;
        anyhow::ensure!(self.p_max >= 1, "p_max must be at least 1");
        anyhow::ensure!(self.gate > 0.0, "gate must be positive");
        Ok(())
    }
}

/// Runs one method on one snapshot. Refinement starts from the CNN output
/// for `cnn+gn` and from the truth for `gn-oracle-init`.
pub fn run_method(
    method: Method,
    obs: &ChannelSnapshot,
    config: &EvalConfig,
    cnn: Option<&mut CnnEstimator>,
) -> anyhow::Result<EstimationResult> {
    match method {
        Method::Periodogram => Ok(periodogram_estimate(obs, config.p_max, &config.periodogram)?),
        Method::Cnn => Ok(cnn.context("cnn needs trained weights")?.estimate(obs)?),
        Method::CnnGn => {
            let mut init = cnn.context("cnn+gn needs trained weights")?.estimate(obs)?;
            init.method = Method::CnnGn;
            if init.paths.is_empty() {
                return Ok(init);
            }
            Ok(gauss_newton_refine(&init, obs, None, &config.refine)?)
        }
        Method::GnOracleInit => {
            let truth = obs.truth.clone().context("gn-oracle-init needs ground truth")?;
            let init = EstimationResult::new(truth, Method::GnOracleInit);
            Ok(gauss_newton_refine(&init, obs, obs.sigma2, &config.refine)?)
        }
    }
}

/// Estimates every record with every method, pairs estimates with the truth
/// and reduces the outcomes into per-bin rows. CNN methods are skipped with
/// a warning when no estimator is supplied.
pub fn evaluate_run(
    records: &[DatasetRecord],
    methods: &[Method],
    config: &EvalConfig,
    mut cnn: Option<&mut CnnEstimator>,
) -> anyhow::Result<BenchReport> {
    config.validate()?;
    let active: Vec<Method> = methods
        .iter()
        .copied()
        .filter(|m| {
            let ok = !m.needs_weights() || cnn.is_some();
            if !ok {
                warn!("skipping {m}: no trained weights");
            }
            ok
        })
        .collect();
    let mut builder = ReportBuilder::new();
    let mut dropped = 0usize;
    for (i, rec) in records.iter().enumerate() {
        let Some(bin) = config.snr_bins.bin(rec.snr_db()?) else {
            dropped += 1;
            continue;
        };
        let truth = rec.truth();
        for &m in &active {
            let est = match run_method(m, &rec.snapshot, config, cnn.as_deref_mut()) {
                Ok(e) => e,
                Err(e) => {
                    // a failed estimate counts as detecting nothing
                    warn!("record {i}, {m}: {e:#}");
                    EstimationResult::new(PathSet::empty(), m)
                }
            };
            let matching = match_paths(&est.paths, truth, config.gate);
            builder.add_trial(bin, &est, truth, &matching);
        }
        if config.crb {
            match crb_tau_alpha(truth, &rec.snapshot.grid, rec.sigma2()) {
                Ok(b) => builder.add_crb(bin, &b),
                Err(e) => warn!("record {i}: no bound ({e})"),
            }
        }
    }
    if dropped > 0 {
        warn!("{dropped} records fell outside the SNR bins");
    }
    Ok(builder.finish())
}
