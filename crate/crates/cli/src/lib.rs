//! Experiment harness around `ald-core`: typed configs, experiment drivers,
//! a chain-batch cache, CSV results and generated plot scripts.

pub mod cache;
pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ndarray::Array2;

use crate::cache::BatchCache;
use crate::config::{ExperimentConfig, ExperimentKind, Profile};
use crate::experiments::bounds_report::{run_bounds_report, write_report_files, BoundsReport};
use crate::output::{emit_csv, emit_plot_script, ResultRow};

/// Loads a config, applies the profile and seed override, and revalidates.
pub fn prepare(path: &Path, profile: Profile, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    config.apply_profile(profile);
    if let Some(seed) = seed {
        config.sampling.seed = seed;
    }
    config.validate().with_context(|| format!("{} after applying the profile", path.display()))?;
    Ok(config)
}

#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<ResultRow>,
    pub written: Vec<PathBuf>,
    pub bounds: Option<BoundsReport>,
}

/// Runs the experiment a config names and writes its outputs.
///
/// `profile` and `seed` are forwarded to the sources of a robustness run.
pub fn run_config(config: &ExperimentConfig, profile: Profile, seed: Option<u64>) -> Result<RunSummary> {
    let cache = config.output.cache_dir.as_ref().map(BatchCache::new);
    let rows = match config.experiment {
        ExperimentKind::Fig2BiasVsDim | ExperimentKind::Fig3ScoreError => {
            experiments::sweep::run_dimension_sweep(config, cache.as_ref())?
        }
        ExperimentKind::Fig1StepsToAccuracy => experiments::steps_search::run_steps_search(config, cache.as_ref())?,
        ExperimentKind::KnnRobustness => experiments::robustness::run_knn_robustness(config, profile, seed)?,
        ExperimentKind::BoundsReport => {
            let report = run_bounds_report(config)?;
            let csv = config.output.csv.clone();
            let text = config.output.bounds_report_path();
            write_report_files(config, &report, &csv, &text)?;
            return Ok(RunSummary { rows: Vec::new(), written: vec![csv, text], bounds: Some(report) });
        }
    };
    emit_csv(&rows, &config.output.csv)?;
    emit_plot_script(&rows, &config.output.csv, config.output.log_floor, &config.output.plot_script)?;
    Ok(RunSummary {
        rows,
        written: vec![config.output.csv.clone(), config.output.plot_script.clone()],
        bounds: None,
    })
}

/// Bounds for any config, written next to its results.
pub fn run_bounds(config: &ExperimentConfig) -> Result<(BoundsReport, Vec<PathBuf>)> {
    let report = run_bounds_report(config)?;
    let (csv, text) = if config.experiment == ExperimentKind::BoundsReport {
        (config.output.csv.clone(), config.output.bounds_report_path())
    } else {
        (config.output.bounds_csv_path(), config.output.bounds_report_path())
    };
    write_report_files(config, &report, &csv, &text)?;
    Ok((report, vec![csv, text]))
}

/// Numeric matrix from text: one row per line, values separated by commas
/// and/or whitespace. Blank lines and lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().with_context(|| format!("line {}: bad number {t:?}", lineno + 1)))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                anyhow::bail!("line {}: {} values, expected {c}", lineno + 1, row.len())
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.context("no data rows")?;
    Ok(Array2::from_shape_vec((rows, cols), values)?)
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_matrix(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_formats() {
        let m = parse_matrix("# header\n1, 2\n3 4\n\n5,\t6\n").unwrap();
        assert_eq!(m, ndarray::array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert!(parse_matrix("1 2\n3\n").is_err());
        assert!(parse_matrix("1 x\n").is_err());
        assert!(parse_matrix("# nothing\n").is_err());
    }
}
