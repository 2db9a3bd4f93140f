//! Weights files: a little-endian f32 blob at `path` and JSON metadata at
//! `path.json`.

use std::fs;
use std::path::{Path, PathBuf};

use gridfree_core::dataset::DatasetRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CnnError, Result};
use crate::input::InputConfig;
use crate::network::{Network, NetworkConfig};
use crate::train::{EpochRecord, TrainingSpec};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsMeta {
    pub format_version: u32,
    pub network: NetworkConfig,
    pub input: InputConfig,
    pub training: Option<TrainingSpec>,
    pub dataset_hash: Option<String>,
    pub seed: u64,
    pub n_values: usize,
    pub best_epoch: Option<usize>,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
}

impl WeightsMeta {
    pub fn untrained(network: &NetworkConfig, input: &InputConfig, seed: u64) -> Self {
        Self {
            format_version: WEIGHTS_FORMAT_VERSION,
            network: network.clone(),
            input: input.clone(),
            training: None,
            dataset_hash: None,
            seed,
            n_values: 0,
            best_epoch: None,
            history: Vec::new(),
        }
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// SHA-256 over every record's truth, noise variance and stored samples.
pub fn dataset_hash(records: &[DatasetRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        let t = r.truth();
        h.update((t.len() as u64).to_le_bytes());
        for p in 0..t.len() {
            for v in [t.gammas[p].re, t.gammas[p].im, t.taus[p], t.alphas[p]] {
                h.update(v.to_le_bytes());
            }
        }
        h.update(r.sigma2().to_le_bytes());
        for z in r.snapshot.data.iter() {
            h.update((z.re as f32).to_le_bytes());
            h.update((z.im as f32).to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_weights(path: &Path, net: &Network, meta: &WeightsMeta) -> Result<()> {
    let values = net.state();
    let mut meta = meta.clone();
    meta.n_values = values.len();
    meta.network = net.config().clone();
    let mut blob = Vec::with_capacity(4 * values.len());
    for v in &values {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, blob)?;
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<(Network, WeightsMeta)> {
    let meta: WeightsMeta = serde_json::from_str(&fs::read_to_string(meta_path(path))?)?;
    if meta.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(CnnError::Format(format!("unsupported format version {}", meta.format_version)));
    }
    let blob = fs::read(path)?;
    if blob.len() != 4 * meta.n_values {
        return Err(CnnError::Format(format!(
            "blob has {} bytes, metadata promises {} values",
            blob.len(),
            meta.n_values
        )));
    }
    let values: Vec<f32> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut net = Network::new(&meta.network, meta.seed)?;
    net.load_state(&values)?;
    Ok((net, meta))
}
