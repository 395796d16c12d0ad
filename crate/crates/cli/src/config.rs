//! Typed experiment configuration read from TOML.
//!
//! Unknown keys are errors at every level, so a misspelled exponent cannot
//! silently fall back to a default.

use std::path::{Path, PathBuf};

use ald_core::{
    build_truncated_mixture, smooth, AldConfig, AnnealSchedule, CoordinateRule, DiagGMM, DriftMode,
    InitMode, MixturePerturbation, SpectrumSpec,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig1StepsToAccuracy,
    Fig2BiasVsDim,
    Fig3ScoreError,
    KnnRobustness,
    BoundsReport,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1StepsToAccuracy => "fig1_steps_to_accuracy",
            ExperimentKind::Fig2BiasVsDim => "fig2_bias_vs_dim",
            ExperimentKind::Fig3ScoreError => "fig3_score_error",
            ExperimentKind::KnnRobustness => "knn_robustness",
            ExperimentKind::BoundsReport => "bounds_report",
        }
    }
}

/// Target mixture: component `i` has mean rule `means[i]` and variances
/// `tau[i] * variance(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub weights: Vec<f64>,
    pub means: Vec<CoordinateRule>,
    pub variance: SpectrumSpec,
    pub tau: Vec<f64>,
}

impl TargetConfig {
    pub fn truncate(&self, d: usize) -> Result<DiagGMM, ConfigError> {
        let specs = vec![self.variance.clone(); self.weights.len()];
        build_truncated_mixture(&self.weights, &self.means, &specs, &self.tau, d)
            .map_err(|e| ConfigError::Invalid(format!("target at d = {d}: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    #[default]
    Exact,
    Misspecified,
    IdealCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    ExactSmoothed,
    CustomMixture,
}

/// Perturbation applied identically to every component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub dweights: Option<Vec<f64>>,
    #[serde(default)]
    pub dmeans: CoordinateRule,
    #[serde(default)]
    pub dvars: CoordinateRule,
}

impl PerturbationConfig {
    pub fn to_core(&self, components: usize) -> MixturePerturbation {
        MixturePerturbation {
            dweights: self.dweights.clone().unwrap_or_else(|| vec![0.0; components]),
            dmeans: vec![self.dmeans.clone(); components],
            dvars: vec![self.dvars.clone(); components],
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    pub gamma: SpectrumSpec,
    pub c_base: SpectrumSpec,
    #[serde(default)]
    pub drift: DriftKind,
    #[serde(default)]
    pub init: InitKind,
    /// Custom initial weights; defaults to the target weights.
    #[serde(default)]
    pub init_weights: Option<Vec<f64>>,
    /// Custom initial variance multipliers; defaults to the target `tau`.
    #[serde(default)]
    pub init_tau: Option<Vec<f64>>,
    /// Whether the custom initial mixture is smoothed to the first level.
    #[serde(default = "yes")]
    pub init_smoothed: bool,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

impl VariantConfig {
    /// Initial law of a custom-mixture variant at dimension `d`.
    pub fn init_mixture(
        &self,
        target: &TargetConfig,
        schedule: &AnnealSchedule,
        d: usize,
    ) -> Result<DiagGMM, ConfigError> {
        let weights = self.init_weights.clone().unwrap_or_else(|| target.weights.clone());
        let tau = self.init_tau.clone().unwrap_or_else(|| target.tau.clone());
        let specs = vec![target.variance.clone(); weights.len()];
        let raw = build_truncated_mixture(&weights, &target.means, &specs, &tau, d)
            .map_err(|e| ConfigError::Invalid(format!("variant {}: init mixture: {e}", self.name)))?;
        if !self.init_smoothed {
            return Ok(raw);
        }
        smooth(&raw, &self.c_base, schedule.theta0())
            .map_err(|e| ConfigError::Invalid(format!("variant {}: init smoothing: {e}", self.name)))
    }

    pub fn ald_config(
        &self,
        target: &TargetConfig,
        schedule: &AnnealSchedule,
        d: usize,
    ) -> Result<AldConfig, ConfigError> {
        let k = target.weights.len();
        let drift_mode = match self.drift {
            DriftKind::Exact => DriftMode::Exact,
            DriftKind::IdealCorrected => DriftMode::IdealCorrected,
            DriftKind::Misspecified => {
                DriftMode::Misspecified { perturbation: self.perturbation.to_core(k) }
            }
        };
        let init_mode = match self.init {
            InitKind::ExactSmoothed => InitMode::ExactSmoothed,
            InitKind::CustomMixture => {
                InitMode::CustomMixture { mixture: self.init_mixture(target, schedule, d)? }
            }
        };
        Ok(AldConfig {
            dim: d,
            schedule: schedule.clone(),
            gamma: self.gamma.clone(),
            c_base: self.c_base.clone(),
            drift_mode,
            init_mode,
        })
    }

    /// The mixture whose exact score the drift uses.
    pub fn score_mixture(&self, target: &DiagGMM) -> Result<DiagGMM, ConfigError> {
        match self.drift {
            DriftKind::Misspecified => self
                .perturbation
                .to_core(target.n_components())
                .apply(target)
                .map_err(|e| ConfigError::Invalid(format!("variant {}: {e}", self.name))),
            _ => Ok(target.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub n_steps: usize,
    pub dt: f64,
    pub s_half: f64,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<AnnealSchedule, ConfigError> {
        self.with_steps(self.n_steps)
    }

    pub fn with_steps(&self, n_steps: usize) -> Result<AnnealSchedule, ConfigError> {
        AnnealSchedule::new(n_steps, self.dt, self.s_half).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_chains: usize,
    pub n_target_samples: usize,
    pub k: Vec<usize>,
    #[serde(default = "three")]
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub d: Vec<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub step_cap: Option<usize>,
    #[serde(default)]
    pub search_grid: Option<Vec<usize>>,
    /// Bisection stops once the bracket is narrower than this fraction of its
    /// lower end.
    #[serde(default = "search_resolution")]
    pub search_resolution: f64,
}

fn search_resolution() -> f64 {
    0.05
}

fn log_floor() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: PathBuf,
    pub plot_script: PathBuf,
    /// Positive floor applied before log-scale plotting only.
    #[serde(default = "log_floor")]
    pub log_floor: f64,
    /// Where chain batches are cached; no caching when absent.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Record wall-clock times; off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub bounds_csv: Option<PathBuf>,
    #[serde(default)]
    pub bounds_report: Option<PathBuf>,
}

impl OutputConfig {
    fn sibling(&self, suffix: &str) -> PathBuf {
        let stem = self.csv.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        self.csv.with_file_name(format!("{stem}{suffix}"))
    }

    pub fn bounds_csv_path(&self) -> PathBuf {
        self.bounds_csv.clone().unwrap_or_else(|| self.sibling("_bounds.csv"))
    }

    pub fn bounds_report_path(&self) -> PathBuf {
        self.bounds_report.clone().unwrap_or_else(|| self.sibling("_bounds.txt"))
    }
}

fn robustness_k() -> Vec<usize> {
    vec![20, 50, 80]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// Configs whose cached batches are re-evaluated.
    pub sources: Vec<PathBuf>,
    #[serde(default = "robustness_k")]
    pub k: Vec<usize>,
}

fn grid_points() -> usize {
    ald_core::bounds::DEFAULT_GRID_POINTS
}

fn bounds_epsilon() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    /// Accuracy used for the horizon `K_d / epsilon` when the sweep has none.
    #[serde(default = "bounds_epsilon")]
    pub epsilon: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { grid_points: grid_points(), epsilon: bounds_epsilon() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub target: TargetConfig,
    #[serde(default)]
    pub variants: Vec<VariantConfig>,
    pub schedule: ScheduleConfig,
    pub sampling: SamplingConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub robustness: Option<RobustnessConfig>,
    #[serde(default)]
    pub bounds: BoundsConfig,
}

/// Reduced-cost settings for continuous integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    #[default]
    Full,
    Ci,
}

pub const CI_STEPS: usize = 2000;
pub const CI_SAMPLES: usize = 1000;
pub const CI_MAX_D: usize = 25;
pub const CI_MAX_D_STEPS_SEARCH: usize = 12;

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Profile::Full),
            "ci" => Ok(Profile::Ci),
            other => Err(format!("unknown profile {other:?}, expected full or ci")),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let config = Self::from_toml_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(source) })?;
        config.validate()?;
        Ok(config)
    }

    /// Caps steps, sample sizes and dimensions. The step-search cap is kept,
    /// since lowering it would make exceeding it meaningless.
    pub fn apply_profile(&mut self, profile: Profile) {
        if profile == Profile::Full {
            return;
        }
        self.schedule.n_steps = self.schedule.n_steps.min(CI_STEPS);
        self.sampling.n_chains = self.sampling.n_chains.min(CI_SAMPLES);
        self.sampling.n_target_samples = self.sampling.n_target_samples.min(CI_SAMPLES);
        let max_d = match self.experiment {
            ExperimentKind::Fig1StepsToAccuracy => CI_MAX_D_STEPS_SEARCH,
            _ => CI_MAX_D,
        };
        self.sweep.d.retain(|&d| d <= max_d);
    }

    pub fn max_d(&self) -> usize {
        self.sweep.d.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let k = self.target.weights.len();
        if k == 0 {
            return invalid("target needs at least one component");
        }
        if self.target.means.len() != k || self.target.tau.len() != k {
            return invalid(format!(
                "target has {k} weights, {} mean rules and {} tau values",
                self.target.means.len(),
                self.target.tau.len()
            ));
        }
        if self.sweep.d.is_empty() {
            return invalid("sweep.d is empty");
        }
        if self.sweep.d[0] == 0 || self.sweep.d.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("sweep.d must be positive and strictly increasing");
        }
        let d_max = self.max_d();
        self.target.truncate(d_max)?;
        let schedule = self.schedule.build()?;
        if self.sampling.k.is_empty() {
            return invalid("sampling.k is empty");
        }
        if self.sampling.repeats == 0 {
            return invalid("sampling.repeats must be at least 1");
        }
        let ks = self.sampling.k.iter().chain(self.robustness.iter().flat_map(|r| r.k.iter()));
        for &kk in ks {
            if kk == 0 || kk >= self.sampling.n_target_samples || kk > self.sampling.n_chains {
                return invalid(format!(
                    "k = {kk} needs 1 <= k < n_target_samples = {} and k <= n_chains = {}",
                    self.sampling.n_target_samples, self.sampling.n_chains
                ));
            }
        }
        if !(self.output.log_floor > 0.0) {
            return invalid("output.log_floor must be positive");
        }
        if self.bounds.grid_points < 2 {
            return invalid("bounds.grid_points must be at least 2");
        }
        if !(self.bounds.epsilon > 0.0) {
            return invalid("bounds.epsilon must be positive");
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return invalid("variant names must be unique");
        }
        for v in &self.variants {
            self.validate_variant(v, &schedule, d_max)?;
        }
        match self.experiment {
            ExperimentKind::Fig1StepsToAccuracy => self.validate_search(),
            ExperimentKind::KnnRobustness => match &self.robustness {
                Some(r) if !r.sources.is_empty() && !r.k.is_empty() => Ok(()),
                _ => invalid("knn_robustness needs [robustness] with sources and k"),
            },
            ExperimentKind::Fig2BiasVsDim => {
                if self.variants.iter().any(|v| v.drift != DriftKind::Exact) {
                    return invalid("fig2_bias_vs_dim uses the exact drift only");
                }
                self.require_variants()
            }
            _ => self.require_variants(),
        }
    }

    fn require_variants(&self) -> Result<(), ConfigError> {
        if self.variants.is_empty() {
            return invalid(format!("{} needs at least one [[variants]] entry", self.experiment.as_str()));
        }
        Ok(())
    }

    fn validate_variant(&self, v: &VariantConfig, schedule: &AnnealSchedule, d: usize) -> Result<(), ConfigError> {
        let ctx = |what: &str, e: ald_core::MixtureError| {
            ConfigError::Invalid(format!("variant {}: {what}: {e}", v.name))
        };
        v.gamma.eigenvalues(d).map_err(|e| ctx("gamma", e))?;
        v.c_base.eigenvalues(d).map_err(|e| ctx("c_base", e))?;
        let custom = v.init_weights.is_some() || v.init_tau.is_some() || !v.init_smoothed;
        if v.init == InitKind::ExactSmoothed && custom {
            return invalid(format!(
                "variant {}: init_weights, init_tau and init_smoothed need init = \"custom_mixture\"",
                v.name
            ));
        }
        if v.drift != DriftKind::Misspecified && v.perturbation != PerturbationConfig::default() {
            return invalid(format!("variant {}: a perturbation needs drift = \"misspecified\"", v.name));
        }
        let target = self.target.truncate(d)?;
        v.score_mixture(&target)?;
        v.ald_config(&self.target, schedule, d)?;
        Ok(())
    }

    fn validate_search(&self) -> Result<(), ConfigError> {
        self.require_variants()?;
        let (Some(eps), Some(cap), Some(grid)) =
            (self.sweep.epsilon, self.sweep.step_cap, self.sweep.search_grid.as_ref())
        else {
            return invalid("fig1_steps_to_accuracy needs sweep.epsilon, sweep.step_cap and sweep.search_grid");
        };
        if !(eps > 0.0) {
            return invalid("sweep.epsilon must be positive");
        }
        if grid.is_empty() || grid[0] < 2 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("sweep.search_grid must be strictly increasing with entries >= 2");
        }
        if !(self.sweep.search_resolution > 0.0) {
            return invalid("sweep.search_resolution must be positive");
        }
        if cap < grid[0] {
            return invalid(format!("step cap {cap} is below the smallest grid point {}", grid[0]));
        }
        Ok(())
    }
}
