//! Re-evaluates cached chain batches of other experiments for several `k`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use super::{cell_seed, chain_key, target_samples};
use crate::cache::BatchCache;
use crate::config::{ExperimentConfig, ExperimentKind, Profile};
use crate::output::{ResultRow, Steps};

/// Loads a source config with the same profile and seed override as the caller.
pub fn load_source(path: &Path, profile: Profile, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut source = ExperimentConfig::load(path)?;
    source.apply_profile(profile);
    if let Some(seed) = seed {
        source.sampling.seed = seed;
    }
    Ok(source)
}

/// Rows for every cell of every source, keyed `"<source experiment>/<variant>"`.
/// Nothing is simulated; a missing batch is an error naming the rerun needed.
pub fn run_knn_robustness(config: &ExperimentConfig, profile: Profile, seed: Option<u64>) -> Result<Vec<ResultRow>> {
    let spec = config.robustness.as_ref().ok_or_else(|| anyhow!("missing [robustness] block"))?;
    let mut rows = Vec::new();
    for path in &spec.sources {
        let source = load_source(path, profile, seed).with_context(|| format!("source {}", path.display()))?;
        if !matches!(source.experiment, ExperimentKind::Fig2BiasVsDim | ExperimentKind::Fig3ScoreError) {
            bail!("source {} is a {} config; only dimension sweeps store batches", path.display(), source.experiment.as_str());
        }
        let Some(dir) = source.output.cache_dir.clone() else {
            bail!("source {} has no output.cache_dir, so its batches were not kept", path.display());
        };
        let cache = BatchCache::new(dir);
        let schedule = source.schedule.build()?;
        let experiment = source.experiment.as_str();
        for &d in &source.sweep.d {
            let target = source.target.truncate(d)?;
            for repeat in 0..source.sampling.repeats {
                let reference = target_samples(&source, experiment, d, repeat)?;
                for variant in &source.variants {
                    let digest = variant.ald_config(&source.target, &schedule, d)?.digest(&target);
                    let seed = cell_seed(source.sampling.seed, &chain_key(experiment, &variant.name, d, repeat));
                    let batch = cache.load(&digest, seed, source.sampling.n_chains)?.ok_or_else(|| {
                        anyhow!(
                            "no cached batch for {experiment}/{}/d={d}/repeat={repeat}; run `ald run {}` with the same profile and seed first",
                            variant.name,
                            path.display()
                        )
                    })?;
                    let kls = super::kl_values(&reference, &Ok(batch), &spec.k)?;
                    for (&k, kl) in spec.k.iter().zip(kls) {
                        rows.push(ResultRow {
                            experiment: config.experiment.as_str().to_string(),
                            variant: format!("{experiment}/{}", variant.name),
                            d,
                            k,
                            seed: source.sampling.seed,
                            repeat,
                            kl,
                            steps: Steps::Count(schedule.n_steps()),
                            wall_time_s: 0.0,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}
