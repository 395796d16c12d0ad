//! Experiment drivers.
//!
//! Every (variant, d, repeat) cell is seeded from the master seed and a cell
//! key, so cells are independent of each other and of execution order. Cells
//! run one after another; the chains inside a cell run on the rayon pool.

pub mod bounds_report;
pub mod robustness;
pub mod steps_search;
pub mod sweep;

use std::time::Instant;

use ald_core::{knn_kl_multi, AnnealSchedule, ChainBatch, EngineError};
use anyhow::{Context, Result};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::cache::BatchCache;
use crate::config::{ExperimentConfig, VariantConfig};
use crate::output::KlValue;

/// First 8 bytes of `SHA-256(master_le || key)`.
pub fn cell_seed(master: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn chain_key(experiment: &str, variant: &str, d: usize, repeat: usize) -> String {
    format!("{experiment}/{variant}/{d}/{repeat}/chains")
}

/// Reference samples are shared by all variants of a cell.
pub fn target_key(experiment: &str, d: usize, repeat: usize) -> String {
    format!("{experiment}/target/{d}/{repeat}")
}

/// One simulated cell.
pub struct CellBatch {
    /// `Err` when some chain diverged.
    pub batch: Result<ChainBatch, EngineError>,
    pub seconds: f64,
}

/// Runs (or loads) the chains of one cell. Divergence is returned in-band.
pub fn simulate_cell(
    config: &ExperimentConfig,
    variant: &VariantConfig,
    schedule: &AnnealSchedule,
    d: usize,
    repeat: usize,
    cache: Option<&BatchCache>,
) -> Result<CellBatch> {
    let target = config.target.truncate(d)?;
    let ald = variant.ald_config(&config.target, schedule, d)?;
    let digest = ald.digest(&target);
    let key = chain_key(config.experiment.as_str(), &variant.name, d, repeat);
    let seed = cell_seed(config.sampling.seed, &key);
    let n = config.sampling.n_chains;
    if let Some(cache) = cache {
        if let Some(batch) = cache.load(&digest, seed, n)? {
            log::debug!("{key}: cached batch");
            return Ok(CellBatch { batch: Ok(batch), seconds: 0.0 });
        }
    }
    let start = Instant::now();
    let batch = ald_core::engine::run_chains(&ald, &target, n, seed);
    let seconds = start.elapsed().as_secs_f64();
    match &batch {
        Ok(b) => {
            if let Some(cache) = cache {
                cache.store(b)?;
            }
        }
        Err(e) => log::warn!("{key}: {e}"),
    }
    Ok(CellBatch { batch, seconds })
}

/// Fresh target samples for a cell.
pub fn target_samples(config: &ExperimentConfig, experiment: &str, d: usize, repeat: usize) -> Result<Array2<f64>> {
    let target = config.target.truncate(d)?;
    let seed = cell_seed(config.sampling.seed, &target_key(experiment, d, repeat));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(target.sample(config.sampling.n_target_samples, &mut rng))
}

/// `KL(target || chains)` for each `k`, or `Diverged` for every `k`.
pub fn kl_values(
    reference: &Array2<f64>,
    batch: &Result<ChainBatch, EngineError>,
    ks: &[usize],
) -> Result<Vec<KlValue>> {
    match batch {
        Err(_) => Ok(vec![KlValue::Diverged; ks.len()]),
        Ok(b) => {
            let est = knn_kl_multi(reference.view(), b.samples.view(), ks).context("kNN estimate")?;
            Ok(est.into_iter().map(|e| KlValue::Value(e.value)).collect())
        }
    }
}
