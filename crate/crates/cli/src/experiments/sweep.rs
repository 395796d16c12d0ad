//! KL against dimension for a fixed schedule (bias and score-error sweeps).

use anyhow::Result;

use super::{kl_values, simulate_cell, target_samples};
use crate::cache::BatchCache;
use crate::config::ExperimentConfig;
use crate::output::{ResultRow, Steps};

pub fn run_dimension_sweep(config: &ExperimentConfig, cache: Option<&BatchCache>) -> Result<Vec<ResultRow>> {
    let schedule = config.schedule.build()?;
    let experiment = config.experiment.as_str();
    let ks = &config.sampling.k;
    let mut rows = Vec::new();
    for &d in &config.sweep.d {
        for repeat in 0..config.sampling.repeats {
            let reference = target_samples(config, experiment, d, repeat)?;
            for variant in &config.variants {
                let cell = simulate_cell(config, variant, &schedule, d, repeat, cache)?;
                let kls = kl_values(&reference, &cell.batch, ks)?;
                log::info!(
                    "{experiment} {} d={d} repeat={repeat}: kl={:?}",
                    variant.name,
                    kls.iter().map(|k| k.value()).collect::<Vec<_>>()
                );
                for (&k, kl) in ks.iter().zip(kls) {
                    rows.push(ResultRow {
                        experiment: experiment.to_string(),
                        variant: variant.name.clone(),
                        d,
                        k,
                        seed: config.sampling.seed,
                        repeat,
                        kl,
                        steps: Steps::Count(schedule.n_steps()),
                        wall_time_s: if config.output.record_wall_time { cell.seconds } else { 0.0 },
                    });
                }
            }
        }
    }
    Ok(rows)
}
