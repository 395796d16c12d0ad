//! Batched, deterministic chain execution.
//!
//! Chain `r` owns a ChaCha8 stream seeded by the master seed with stream id
//! `r`, so every row is reproducible on its own and independent of how the
//! chains are spread over worker threads. Each step rebuilds one score kernel
//! for its smoothing level, shared read-only by all chains.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::drift::ideal_coefficients;
use super::schedule::AnnealSchedule;
use crate::error::EngineError;
use crate::mixture::{DiagGMM, MixturePerturbation, ScoreKernel};
use crate::spectrum::SpectrumSpec;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftMode {
    Exact,
    Misspecified { perturbation: MixturePerturbation },
    IdealCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitMode {
    ExactSmoothed,
    CustomMixture { mixture: DiagGMM },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AldConfig {
    pub dim: usize,
    pub schedule: AnnealSchedule,
    pub gamma: SpectrumSpec,
    /// Base smoothing spectrum; the level-`theta` marginal adds `theta * lambda_j`.
    pub c_base: SpectrumSpec,
    pub drift_mode: DriftMode,
    pub init_mode: InitMode,
}

impl AldConfig {
    /// Hex SHA-256 of the canonical JSON encoding of `(self, target)`.
    pub fn digest(&self, target: &DiagGMM) -> String {
        let json = serde_json::to_vec(&(self, target)).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Final chain states; row `r` is chain `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBatch {
    pub samples: Array2<f64>,
    pub seed: u64,
    pub config_digest: String,
    pub steps_run: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Schedule indices `k` at which the state `X_k` is recorded.
    pub checkpoints: Vec<usize>,
    /// Drop the diffusion term (the initial draw is still random).
    pub zero_noise: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub batch: ChainBatch,
    pub checkpoints: Vec<(usize, Array2<f64>)>,
}

/// Generator for chain `chain` under master seed `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// `n` draws from the target smoothed to level `theta0`.
pub fn init_exact_smoothed<R: Rng + ?Sized>(
    target: &DiagGMM,
    c_base: &SpectrumSpec,
    theta0: f64,
    n: usize,
    rng: &mut R,
) -> Result<Array2<f64>, EngineError> {
    let smoothed = crate::mixture::smooth(target, c_base, theta0)?;
    Ok(smoothed.sample(n, rng))
}

pub fn run_chains(
    config: &AldConfig,
    target: &DiagGMM,
    n_chains: usize,
    seed: u64,
) -> Result<ChainBatch, EngineError> {
    Ok(run(config, target, n_chains, seed, &RunOptions::default())?.batch)
}

struct Scratch {
    comp: Vec<f64>,
    logp: Vec<f64>,
    score: Vec<f64>,
}

pub fn run(
    config: &AldConfig,
    target: &DiagGMM,
    n_chains: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutput, EngineError> {
    let d = config.dim;
    if target.dim() != d {
        return Err(EngineError::Shape(format!("config dim {d}, target dim {}", target.dim())));
    }
    if n_chains == 0 {
        return Err(EngineError::NoChains);
    }
    let schedule = &config.schedule;
    let last = schedule.n_steps() - 1;
    for &k in &options.checkpoints {
        if k > last {
            return Err(EngineError::BadCheckpoint { step: k, last });
        }
    }
    let gamma = config.gamma.eigenvalues(d)?;
    let lambda = config.c_base.eigenvalues(d)?;
    let dt = schedule.dt();

    let drift_target = match &config.drift_mode {
        DriftMode::Misspecified { perturbation } => perturbation.apply(target)?,
        _ => target.clone(),
    };
    let drift_coef = match config.drift_mode {
        DriftMode::IdealCorrected => ideal_coefficients(
            &config.gamma,
            &config.c_base,
            schedule.theta0(),
            schedule.t_horizon(),
            d,
        )?,
        _ => gamma.clone(),
    };
    let noise_scale: Vec<f64> = gamma.iter().map(|g| (2.0 * dt * g).sqrt()).collect();

    let init = match &config.init_mode {
        InitMode::ExactSmoothed => crate::mixture::smooth(target, &config.c_base, schedule.theta0())?,
        InitMode::CustomMixture { mixture } => {
            if mixture.dim() != d {
                return Err(EngineError::Shape(format!(
                    "init mixture dim {}, config dim {d}",
                    mixture.dim()
                )));
            }
            mixture.clone()
        }
    };
    let init_sds = init.std_devs();

    let mut state = vec![0.0; n_chains * d];
    let mut rngs: Vec<ChaCha8Rng> = (0..n_chains).map(|r| chain_rng(seed, r)).collect();
    state.par_chunks_mut(d).zip(rngs.par_iter_mut()).for_each(|(x, rng)| {
        init.draw_into(&init_sds, rng, x);
    });

    let mut snapshots = Vec::new();
    let mut record = |k: usize, state: &[f64]| {
        if options.checkpoints.contains(&k) {
            let m = Array2::from_shape_vec((n_chains, d), state.to_vec()).expect("shape");
            snapshots.push((k, m));
        }
    };
    record(0, &state);

    let k_comp = drift_target.n_components();
    let mut kernel = ScoreKernel::new(&drift_target);
    for step in 0..last {
        kernel.set_level(&drift_target, Some(&lambda), schedule.theta(step));
        let kernel = &kernel;
        let diverged = state
            .par_chunks_mut(d)
            .zip(rngs.par_iter_mut())
            .enumerate()
            .map_init(
                || Scratch { comp: vec![0.0; k_comp * d], logp: vec![0.0; k_comp], score: vec![0.0; d] },
                |s, (chain, (x, rng))| {
                    kernel.score_into(x, &mut s.comp, &mut s.logp, &mut s.score);
                    let mut ok = true;
                    for j in 0..d {
                        let xi: f64 = if options.zero_noise { 0.0 } else { rng.sample(StandardNormal) };
                        x[j] += dt * drift_coef[j] * s.score[j] + noise_scale[j] * xi;
                        ok &= x[j].is_finite();
                    }
                    if ok {
                        None
                    } else {
                        Some(chain)
                    }
                },
            )
            .filter_map(|c| c)
            .min();
        if let Some(chain) = diverged {
            return Err(EngineError::Diverged { chain, step });
        }
        record(step + 1, &state);
    }

    let samples = Array2::from_shape_vec((n_chains, d), state).expect("shape");
    Ok(RunOutput {
        batch: ChainBatch {
            samples,
            seed,
            config_digest: config.digest(target),
            steps_run: last,
        },
        checkpoints: snapshots,
    })
}
