use std::ops::ControlFlow;
use std::time::Instant;

use gridfree_core::dataset::{quantize_f32, DatasetRecord};
use gridfree_core::labels::LabelTensor;
use gridfree_core::signal::{add_noise, synthesize, CMatrix};
use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CnnError, Result};
use crate::input::{InputConfig, InputPipeline};
use crate::loss::{objective, LossBreakdown, LossConfig};
use crate::network::{Network, NetworkConfig};
use crate::optim::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSpec {
    pub optimizer: String,
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub loss: LossConfig,
    pub input: InputConfig,
    /// Redraw the noise of every record at each epoch after the first.
    pub regenerate_noise: bool,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            optimizer: "adam".into(),
            adam: AdamConfig::default(),
            batch_size: 32,
            epochs: 20,
            max_steps: None,
            seed: 0,
            loss: LossConfig::default(),
            input: InputConfig::default(),
            regenerate_noise: false,
        }
    }
}

impl TrainingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.optimizer != "adam" {
            return Err(CnnError::Config(format!("unsupported optimizer `{}`", self.optimizer)));
        }
        if self.batch_size == 0 {
            return Err(CnnError::Config("batch_size must be positive".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(CnnError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub validation: Option<LossBreakdown>,
    pub seconds: f64,
}

pub struct TrainOutcome {
    /// Weights of the epoch with the lowest validation objective (the last
    /// epoch without validation data).
    pub network: Network,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// `L0 + beta * L1` of every optimizer step, batch mean.
    pub step_losses: Vec<f64>,
}

struct Sample<'a> {
    data: CMatrix,
    labels: &'a LabelTensor,
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Batch-mean objective and output gradients for one forward pass.
fn batch_loss(
    net: &mut Network,
    pipe: &InputPipeline,
    batch: &[Sample<'_>],
    loss: &LossConfig,
    train: bool,
) -> Result<(LossBreakdown, Vec<f32>, Vec<f32>)> {
    let x = pipe.batch(batch.iter().map(|s| &s.data))?;
    let out = net.forward(x, train)?;
    let n = batch.len();
    let w = 1.0 / n as f64;
    let mut total = LossBreakdown::default();
    let mut d_eta = Vec::with_capacity(out.eta.len());
    let mut d_rho = Vec::with_capacity(out.rho.len());
    for (i, s) in batch.iter().enumerate() {
        let (b, de, dr) = objective(&to_f64(out.eta_row(i)), &s.labels.eta, &to_f64(out.rho_row(i)), &s.labels.rho, loss);
        total.add_scaled(&b, w);
        d_eta.extend(de.iter().map(|g| (g * w) as f32));
        d_rho.extend(dr.iter().map(|g| (g * w) as f32));
    }
    Ok((total, d_eta, d_rho))
}

fn labels_for(records: &[DatasetRecord], cfg: &NetworkConfig) -> Result<Vec<LabelTensor>> {
    records
        .iter()
        .map(|r| Ok(r.labels(&cfg.cell_grid, cfg.p_max)?))
        .collect()
}

fn noisy_copy(record: &DatasetRecord, epoch: usize, regenerate: bool) -> Result<CMatrix> {
    if !regenerate || epoch == 0 {
        return Ok(record.snapshot.data.clone());
    }
    let s = synthesize(record.truth(), &record.snapshot.grid)?;
    let seed = record.noise_seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    Ok(quantize_f32(&add_noise(&s, record.sigma2(), seed)?))
}

/// Mean loss over `records` in inference mode.
pub fn evaluate_loss(
    net: &mut Network,
    records: &[DatasetRecord],
    input: &InputConfig,
    loss: &LossConfig,
    batch_size: usize,
) -> Result<LossBreakdown> {
    let Some(first) = records.first() else {
        return Ok(LossBreakdown::default());
    };
    let pipe = InputPipeline::new(input, &first.snapshot.grid)?;
    let labels = labels_for(records, net.config())?;
    let mut acc = LossBreakdown::default();
    for (chunk, lab) in records.chunks(batch_size.max(1)).zip(labels.chunks(batch_size.max(1))) {
        let batch: Vec<Sample> = chunk
            .iter()
            .zip(lab)
            .map(|(r, l)| Sample {
                data: r.snapshot.data.clone(),
                labels: l,
            })
            .collect();
        let (b, _, _) = batch_loss(net, &pipe, &batch, loss, false)?;
        acc.add_scaled(&b, chunk.len() as f64 / records.len() as f64);
    }
    Ok(acc)
}

/// Trains a freshly initialized network. `on_epoch` sees every finished
/// epoch and may stop training early by returning `ControlFlow::Break`.
pub fn train(
    config: &NetworkConfig,
    train_set: &[DatasetRecord],
    validation: &[DatasetRecord],
    spec: &TrainingSpec,
    mut on_epoch: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<TrainOutcome> {
    spec.validate()?;
    config.validate()?;
    let first = train_set
        .first()
        .ok_or_else(|| CnnError::Config("training set is empty".into()))?;
    let grid = first.snapshot.grid;
    if (grid.n_freq, grid.n_time) != (config.n_freq, config.n_time) {
        return Err(CnnError::Shape(format!(
            "records are {}x{}, network expects {}x{}",
            grid.n_freq, grid.n_time, config.n_freq, config.n_time
        )));
    }
    let pipe = InputPipeline::new(&spec.input, &grid)?;
    if pipe.channels() != config.input_channels {
        return Err(CnnError::Shape(format!(
            "window bank yields {} channels, network expects {}",
            pipe.channels(),
            config.input_channels
        )));
    }
    let labels = labels_for(train_set, config)?;

    let mut net = Network::new(config, spec.seed)?;
    let mut opt = Adam::new(spec.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut step_losses = Vec::new();
    let mut best: Option<(f64, usize, Network)> = None;
    let mut step = 0usize;

    'epochs: for epoch in 0..spec.epochs {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xD1B5_4A32_D192_ED03);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut acc = LossBreakdown::default();
        let mut seen = 0usize;
        for chunk in order.chunks(spec.batch_size) {
            if spec.max_steps.is_some_and(|m| step >= m) {
                break;
            }
            let batch = chunk
                .iter()
                .map(|&i| {
                    Ok(Sample {
                        data: noisy_copy(&train_set[i], epoch, spec.regenerate_noise)?,
                        labels: &labels[i],
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            net.zero_grad();
            let (b, d_eta, d_rho) = batch_loss(&mut net, &pipe, &batch, &spec.loss, true)?;
            if !b.is_finite() || d_eta.iter().chain(&d_rho).any(|g| !g.is_finite()) {
                return Err(CnnError::Divergence {
                    epoch,
                    step,
                    detail: format!("{b:?}"),
                });
            }
            net.backward(&d_eta, &d_rho);
            opt.update(net.params_mut());
            step += 1;
            step_losses.push(b.total);
            acc.add_scaled(&b, chunk.len() as f64);
            seen += chunk.len();
        }
        if seen == 0 {
            break 'epochs;
        }
        let acc = acc.scaled(1.0 / seen as f64);
        let val = if validation.is_empty() {
            None
        } else {
            Some(evaluate_loss(&mut net, validation, &spec.input, &spec.loss, spec.batch_size)?)
        };
        // select on the minimized quantity; `total` alone favours early epochs
        // whose closed gates hide the offset loss
        let score = val.map_or(acc.objective, |v| v.objective);
        if !score.is_finite() {
            return Err(CnnError::Divergence {
                epoch,
                step,
                detail: format!("validation loss {score}"),
            });
        }
        let rec = EpochRecord {
            epoch,
            train: acc,
            validation: val,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!(
            "epoch {epoch}: train {:.5} validation {:?} ({:.1} s)",
            acc.total,
            val.map(|v| v.total),
            rec.seconds
        );
        let flow = on_epoch(&rec);
        history.push(rec);
        let better = match &best {
            None => true,
            Some((s, _, _)) => validation.is_empty() || score < *s,
        };
        if better {
            best = Some((score, epoch, net.clone()));
        }
        if flow.is_break() {
            break;
        }
    }

    let (_, best_epoch, network) = best.unwrap_or((f64::NAN, 0, net));
    Ok(TrainOutcome {
        network,
        history,
        best_epoch,
        step_losses,
    })
}

/// Writes the epoch curves as CSV.
pub fn write_history_csv<W: std::io::Write>(history: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "epoch,train_total,train_order,train_params,train_detection,val_total,val_order,val_params,val_detection,seconds"
    )?;
    for r in history {
        let v = |f: fn(&LossBreakdown) -> f64| r.validation.as_ref().map(|b| f(b).to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.train.total,
            r.train.order,
            r.train.params,
            r.train.detection,
            v(|b| b.total),
            v(|b| b.order),
            v(|b| b.params),
            v(|b| b.detection),
            r.seconds
        )?;
    }
    Ok(())
}
