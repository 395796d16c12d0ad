//! Smallest step count reaching a KL accuracy.
//!
//! The cap is evaluated first; if it misses the accuracy the search stops
//! with `cap_exceeded`. Otherwise the grid is climbed to the first passing
//! point and the bracket below it is bisected. Chains reuse the same seeds
//! at every step count, so neighboring evaluations share their noise.

use std::collections::BTreeMap;

use anyhow::Result;

use super::{kl_values, simulate_cell, target_samples};
use crate::cache::BatchCache;
use crate::config::{ExperimentConfig, VariantConfig};
use crate::output::{KlValue, ResultRow, Steps};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub steps: Steps,
    /// Mean KL at the reported step count, or at the cap when exceeded.
    pub kl: Option<f64>,
    /// Every evaluated `(steps, mean KL)`, `None` for diverged runs.
    pub evaluations: Vec<(usize, Option<f64>)>,
}

/// Search driven by `eval(n) -> mean KL at n steps` (`None` if diverged).
pub fn search_steps(
    mut eval: impl FnMut(usize) -> Result<Option<f64>>,
    epsilon: f64,
    cap: usize,
    grid: &[usize],
    resolution: f64,
) -> Result<SearchOutcome> {
    let mut seen: BTreeMap<usize, Option<f64>> = BTreeMap::new();
    let mut passes = |n: usize, seen: &mut BTreeMap<usize, Option<f64>>| -> Result<bool> {
        let kl = match seen.get(&n) {
            Some(v) => *v,
            None => {
                let v = eval(n)?;
                seen.insert(n, v);
                v
            }
        };
        Ok(kl.is_some_and(|v| v <= epsilon))
    };
    let finish = |steps: Steps, at: usize, seen: BTreeMap<usize, Option<f64>>| SearchOutcome {
        steps,
        kl: seen.get(&at).copied().flatten(),
        evaluations: seen.into_iter().collect(),
    };

    if !passes(cap, &mut seen)? {
        return Ok(finish(Steps::CapExceeded, cap, seen));
    }
    let mut lo: Option<usize> = None;
    let mut hi = cap;
    for &g in grid.iter().filter(|&&g| g < cap) {
        if passes(g, &mut seen)? {
            hi = g;
            break;
        }
        lo = Some(g);
    }
    if let Some(mut lo) = lo {
        while hi - lo > 1 && (hi - lo) as f64 > resolution * lo as f64 {
            let mid = lo + (hi - lo) / 2;
            if passes(mid, &mut seen)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(finish(Steps::Count(hi), hi, seen))
}

fn mean_kl(
    config: &ExperimentConfig,
    variant: &VariantConfig,
    d: usize,
    n_steps: usize,
    cache: Option<&BatchCache>,
) -> Result<Option<f64>> {
    let schedule = config.schedule.with_steps(n_steps)?;
    let experiment = config.experiment.as_str();
    let k = config.sampling.k[0];
    let mut total = 0.0;
    for repeat in 0..config.sampling.repeats {
        let reference = target_samples(config, experiment, d, repeat)?;
        let cell = simulate_cell(config, variant, &schedule, d, repeat, cache)?;
        match kl_values(&reference, &cell.batch, &[k])?[0] {
            KlValue::Value(v) => total += v,
            KlValue::Diverged => return Ok(None),
        }
    }
    let mean = total / config.sampling.repeats as f64;
    log::info!("{experiment} {} d={d} N={n_steps}: mean kl {mean:.4}", variant.name);
    Ok(Some(mean))
}

/// One row per (variant, d) at the first configured `k`, with `repeat = 0`.
pub fn run_steps_search(config: &ExperimentConfig, cache: Option<&BatchCache>) -> Result<Vec<ResultRow>> {
    let eps = config.sweep.epsilon.expect("validated");
    let cap = config.sweep.step_cap.expect("validated");
    let grid = config.sweep.search_grid.clone().expect("validated");
    let mut rows = Vec::new();
    for variant in &config.variants {
        for &d in &config.sweep.d {
            let start = std::time::Instant::now();
            let outcome = search_steps(
                |n| mean_kl(config, variant, d, n, cache),
                eps,
                cap,
                &grid,
                config.sweep.search_resolution,
            )?;
            log::info!("{} d={d}: {}", variant.name, outcome.steps);
            rows.push(ResultRow {
                experiment: config.experiment.as_str().to_string(),
                variant: variant.name.clone(),
                d,
                k: config.sampling.k[0],
                seed: config.sampling.seed,
                repeat: 0,
                kl: outcome.kl.map_or(KlValue::Diverged, KlValue::Value),
                steps: outcome.steps,
                wall_time_s: if config.output.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 },
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [usize; 8] = [250, 500, 1000, 2000, 4000, 8000, 16000, 20000];

    fn decaying(threshold: usize) -> impl FnMut(usize) -> Result<Option<f64>> {
        move |n| Ok(Some(if n >= threshold { 0.1 } else { 1.0 }))
    }

    #[test]
    fn bisects_to_the_threshold() {
        let out = search_steps(decaying(3000), 0.3, 20000, &GRID, 0.0).unwrap();
        assert_eq!(out.steps, Steps::Count(3000));
        assert_eq!(out.kl, Some(0.1));
        let coarse = search_steps(decaying(3000), 0.3, 20000, &GRID, 0.05).unwrap();
        match coarse.steps {
            Steps::Count(n) => assert!((3000..=3100).contains(&n), "{n}"),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn cap_first_and_first_grid_point() {
        let mut calls = Vec::new();
        let out = search_steps(
            |n| {
                calls.push(n);
                Ok(Some(1.0))
            },
            0.3,
            20000,
            &GRID,
            0.05,
        )
        .unwrap();
        assert_eq!(out.steps, Steps::CapExceeded);
        assert_eq!(calls, vec![20000]);
        assert_eq!(out.kl, Some(1.0));
        let out = search_steps(decaying(2), 0.3, 20000, &GRID, 0.05).unwrap();
        assert_eq!(out.steps, Steps::Count(250));
    }

    #[test]
    fn divergence_counts_as_failure() {
        let out = search_steps(|n| Ok(if n < 5000 { None } else { Some(0.0) }), 0.3, 20000, &GRID, 0.0).unwrap();
        assert_eq!(out.steps, Steps::Count(5000));
        assert!(out.evaluations.iter().any(|(_, v)| v.is_none()));
        let out = search_steps(|_| Ok(None), 0.3, 20000, &GRID, 0.0).unwrap();
        assert_eq!((out.steps, out.kl), (Steps::CapExceeded, None));
    }

    #[test]
    fn threshold_between_last_grid_point_and_cap() {
        let out = search_steps(decaying(18000), 0.3, 20000, &GRID, 0.0).unwrap();
        assert_eq!(out.steps, Steps::Count(18000));
    }
}
