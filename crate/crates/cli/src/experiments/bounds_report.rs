//! Theory-side numbers for every (variant, d) of a config.
//!
//! The theory's smoothing operator is the full initial smoothing
//! `theta_0 * c_base`. The budget horizon is the configured schedule's `T`;
//! `K_d / epsilon` is reported next to it.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use ald_core::bounds::{
    condition_report, error_budget, kd_constant, mixture_kl_bound, BoundInputs, ConditionInputs,
    ConditionReport,
};
use ald_core::{smooth, CoordinateRule, SpectrumSpec};
use anyhow::{Context, Result};

use crate::config::{ExperimentConfig, ExperimentKind, InitKind, VariantConfig};
use crate::output::{format_float, mean_kl, read_csv, ResultRow};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub variant: String,
    pub d: usize,
    pub kd: f64,
    /// `K_d / epsilon`.
    pub horizon: f64,
    /// Horizon of the configured schedule.
    pub t_run: f64,
    pub init_kl: f64,
    pub score_comp: f64,
    pub score_resp_envelope: f64,
    pub score_resp_tightened: f64,
    pub bias: f64,
    pub total_envelope: f64,
    pub total_tightened: f64,
    /// Mean measured KL for the same cell, when results exist.
    pub empirical_kl: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub epsilon: f64,
    pub rows: Vec<BoundsRow>,
    /// `None` when some spectrum is not a power law.
    pub conditions: Vec<(String, Option<ConditionReport>)>,
}

impl BoundsReport {
    pub fn row(&self, variant: &str, d: usize) -> Option<&BoundsRow> {
        self.rows.iter().find(|r| r.variant == variant && r.d == d)
    }

    pub fn conditions_for(&self, variant: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|(v, _)| v == variant).and_then(|(_, c)| c.as_ref())
    }
}

fn power_law(spec: &SpectrumSpec) -> Option<(f64, f64)> {
    match spec {
        SpectrumSpec::PowerLaw { scale, exponent } => Some((*exponent, *scale)),
        SpectrumSpec::Constant { value } => Some((0.0, *value)),
        SpectrumSpec::Explicit { .. } => None,
    }
}

fn rule_power_law(rule: &CoordinateRule) -> Option<(f64, f64)> {
    match rule {
        CoordinateRule::Zero => Some((0.0, 0.0)),
        CoordinateRule::Spectrum { spectrum, sign } => power_law(spectrum).map(|(a, s)| (a, sign * s)),
        _ => None,
    }
}

fn sparse_means(rule: &CoordinateRule) -> Option<Vec<(usize, f64)>> {
    match rule {
        CoordinateRule::Zero => Some(Vec::new()),
        CoordinateRule::Sparse { entries } => Some(entries.clone()),
        _ => None,
    }
}

/// Power-law description of a variant, when every spectrum is one.
pub fn condition_inputs(config: &ExperimentConfig, variant: &VariantConfig) -> Option<ConditionInputs> {
    let theta0 = config.schedule.build().ok()?.theta0();
    let (alpha_mix, scale_mix) = power_law(&config.target.variance)?;
    let (alpha_smooth, scale_smooth) = power_law(&variant.c_base)?;
    let (alpha_pre, scale_pre) = power_law(&variant.gamma)?;
    let misspecified = variant.drift == crate::config::DriftKind::Misspecified;
    let pert = &variant.perturbation;
    let (alpha_dm, scale_dm) = if misspecified { rule_power_law(&pert.dmeans)? } else { (0.0, 0.0) };
    let (alpha_dsigma, scale_dsigma) = if misspecified { rule_power_law(&pert.dvars)? } else { (0.0, 0.0) };
    let weights = config.target.weights.clone();
    let perturbed_weights = match (&pert.dweights, misspecified) {
        (Some(dw), true) => weights.iter().zip(dw).map(|(w, d)| w + d).collect(),
        _ => weights.clone(),
    };
    Some(ConditionInputs {
        weights,
        perturbed_weights,
        tau: config.target.tau.clone(),
        means: config.target.means.iter().map(sparse_means).collect::<Option<Vec<_>>>()?,
        alpha_mix,
        scale_mix,
        alpha_smooth,
        scale_smooth: theta0 * scale_smooth,
        alpha_pre,
        scale_pre,
        alpha_dm,
        scale_dm,
        alpha_dsigma,
        scale_dsigma,
    })
}

fn bounds_row(config: &ExperimentConfig, variant: &VariantConfig, d: usize, epsilon: f64) -> Result<BoundsRow> {
    let schedule = config.schedule.build()?;
    let theta0 = schedule.theta0();
    let target = config.target.truncate(d)?;
    let lambda: Vec<f64> = variant.c_base.eigenvalues(d)?.iter().map(|l| theta0 * l).collect();
    let gamma = variant.gamma.eigenvalues(d)?;
    let score_mix = variant.score_mixture(&target)?;
    let score = BoundInputs::from_mixtures(&target, &score_mix, lambda, gamma, 1.0)?;
    let budget = error_budget(&score, &score, schedule.t_horizon(), config.bounds.grid_points)?;
    // the initial law need not be a smoothed mixture, so compare the laws directly
    let rho0 = smooth(&target, &variant.c_base, theta0)?;
    let init_law = match variant.init {
        InitKind::ExactSmoothed => rho0.clone(),
        InitKind::CustomMixture => variant.init_mixture(&config.target, &schedule, d)?,
    };
    let init_kl = mixture_kl_bound(&rho0, &init_law)?;
    let kd = kd_constant(&score);
    let tail = budget.score_comp + budget.bias;
    Ok(BoundsRow {
        variant: variant.name.clone(),
        d,
        kd,
        horizon: kd / epsilon,
        t_run: schedule.t_horizon(),
        init_kl,
        score_comp: budget.score_comp,
        score_resp_envelope: budget.score_resp_envelope,
        score_resp_tightened: budget.score_resp_tightened,
        bias: budget.bias,
        total_envelope: init_kl + tail + budget.score_resp_envelope,
        total_tightened: init_kl + tail + budget.score_resp_tightened,
        empirical_kl: None,
    })
}

/// Measured rows of the config's own sweep, if they have been written.
fn empirical_rows(config: &ExperimentConfig) -> Option<Vec<ResultRow>> {
    if !matches!(config.experiment, ExperimentKind::Fig2BiasVsDim | ExperimentKind::Fig3ScoreError) {
        return None;
    }
    let path = &config.output.csv;
    if !path.exists() {
        return None;
    }
    match read_csv(path) {
        Ok(rows) => Some(rows),
        Err(e) => {
            log::warn!("ignoring {}: {e:#}", path.display());
            None
        }
    }
}

pub fn run_bounds_report(config: &ExperimentConfig) -> Result<BoundsReport> {
    let epsilon = config.sweep.epsilon.unwrap_or(config.bounds.epsilon);
    let measured = empirical_rows(config);
    let k0 = config.sampling.k.iter().copied().min().unwrap_or(0);
    let mut rows = Vec::new();
    let mut conditions = Vec::new();
    for variant in &config.variants {
        for &d in &config.sweep.d {
            let mut row = bounds_row(config, variant, d, epsilon)
                .with_context(|| format!("bounds for {} at d = {d}", variant.name))?;
            row.empirical_kl = measured.as_ref().and_then(|m| mean_kl(m, &variant.name, d, k0));
            rows.push(row);
        }
        let report = condition_inputs(config, variant).map(|c| condition_report(&c, &config.sweep.d));
        conditions.push((variant.name.clone(), report));
    }
    Ok(BoundsReport { epsilon, rows, conditions })
}

pub const BOUNDS_HEADER: [&str; 13] = [
    "variant",
    "d",
    "kd",
    "horizon",
    "t_run",
    "init_kl",
    "score_comp",
    "score_resp_envelope",
    "score_resp_tightened",
    "bias",
    "total_envelope",
    "total_tightened",
    "empirical_kl",
];

pub fn write_bounds_csv<W: std::io::Write>(report: &BoundsReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(BOUNDS_HEADER)?;
    for r in &report.rows {
        let f = format_float;
        w.write_record([
            r.variant.clone(),
            r.d.to_string(),
            f(r.kd),
            f(r.horizon),
            f(r.t_run),
            f(r.init_kl),
            f(r.score_comp),
            f(r.score_resp_envelope),
            f(r.score_resp_tightened),
            f(r.bias),
            f(r.total_envelope),
            f(r.total_tightened),
            r.empirical_kl.map(f).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn short(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4e}")
    } else {
        format!("{x}")
    }
}

pub fn render_text(config: &ExperimentConfig, report: &BoundsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Bounds report for {}", config.experiment.as_str());
    let _ = writeln!(
        s,
        "schedule: N = {}, dt = {}, S = {}; horizon column is K_d / eps with eps = {}",
        config.schedule.n_steps,
        config.schedule.dt,
        config.schedule.s_half,
        report.epsilon
    );
    let _ = writeln!(s, "budget = init_kl + score_comp + score_resp + 2 K_d / T at the configured T\n");
    for (variant, conditions) in &report.conditions {
        let _ = writeln!(s, "== {variant} ==");
        let _ = writeln!(
            s,
            "{:>6} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
            "d", "K_d", "K_d/eps", "init_kl", "comp", "resp_env", "resp_tight", "budget", "measured"
        );
        for r in report.rows.iter().filter(|r| &r.variant == variant) {
            let _ = writeln!(
                s,
                "{:>6} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
                r.d,
                short(r.kd),
                short(r.horizon),
                short(r.init_kl),
                short(r.score_comp),
                short(r.score_resp_envelope),
                short(r.score_resp_tightened),
                short(r.total_tightened),
                r.empirical_kl.map(short).unwrap_or_else(|| "-".into())
            );
        }
        match conditions {
            None => {
                let _ = writeln!(s, "conditions: not available, some spectrum is not a power law");
            }
            Some(c) => {
                let _ = writeln!(s, "{:<15} {:>10} {:>10} {:>10}  partial sums", "condition", "verdict", "margin", "empirical");
                for rec in &c.records {
                    let sums = rec
                        .partial_sums
                        .iter()
                        .map(|(d, v)| format!("{d}:{}", short(*v)))
                        .collect::<Vec<_>>()
                        .join(" ");
                    let margin = rec.exponent_margin.map(|m| format!("{m:+.3}")).unwrap_or_else(|| "-".into());
                    let _ = writeln!(
                        s,
                        "{:<15} {:>10} {:>10} {:>10}  {}",
                        rec.name,
                        rec.verdict.as_str(),
                        margin,
                        rec.empirical.as_str(),
                        sums
                    );
                }
            }
        }
        let _ = writeln!(s);
    }
    s
}

pub fn write_report_files(config: &ExperimentConfig, report: &BoundsReport, csv_path: &Path, text_path: &Path) -> Result<()> {
    for p in [csv_path, text_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    let file = std::fs::File::create(csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    write_bounds_csv(report, &mut w)?;
    w.flush()?;
    std::fs::write(text_path, render_text(config, report)).with_context(|| format!("writing {}", text_path.display()))?;
    Ok(())
}
