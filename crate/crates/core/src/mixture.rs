//! Diagonal Gaussian mixtures: truncated targets, smoothed annealing
//! marginals and perturbed (misspecified) mixtures.
//!
//! All density, responsibility and score evaluations run in log space. Two
//! modes at distance 10 with variances around 1 put the far responsibility near
//! `exp(-50)`, well inside f64 range in log space but prone to underflow once
//! the per-coordinate contributions of a high-dimensional tail are multiplied.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::MixtureError;
use crate::spectrum::{CoordinateRule, SpectrumSpec};

/// Smallest variance accepted at construction. Values below are rejected, not clamped.
pub const VARIANCE_FLOOR: f64 = 1e-300;
/// Tolerance on `|sum(w) - 1|`.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self, MixtureError> {
        Self::check(0, &mean, &var)?;
        Ok(DiagGaussian { mean, var })
    }

    fn check(component: usize, mean: &[f64], var: &[f64]) -> Result<(), MixtureError> {
        if mean.is_empty() {
            return Err(MixtureError::ZeroDimension);
        }
        if mean.len() != var.len() {
            return Err(MixtureError::DimensionMismatch {
                component,
                expected: mean.len(),
                found: var.len(),
            });
        }
        for (j, (&m, &v)) in mean.iter().zip(var).enumerate() {
            if !m.is_finite() {
                return Err(MixtureError::NonFiniteMean { component, coordinate: j + 1, value: m });
            }
            if !(v >= VARIANCE_FLOOR) || !v.is_finite() {
                return Err(MixtureError::NonPositiveVariance {
                    component,
                    coordinate: j + 1,
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Log-density of the diagonal Gaussian at `x` (length not checked).
    pub(crate) fn log_pdf_unchecked(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for ((&xj, &mj), &vj) in x.iter().zip(&self.mean).zip(&self.var) {
            let r = xj - mj;
            quad += r * r / vj;
            log_det += vj.ln();
        }
        -0.5 * (quad + log_det + self.mean.len() as f64 * LN_2PI)
    }
}

/// Finite diagonal Gaussian mixture `sum_i w_i N(m_i, diag(v_i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGMM {
    weights: Vec<f64>,
    components: Vec<DiagGaussian>,
}

impl DiagGMM {
    pub fn new(weights: Vec<f64>, components: Vec<DiagGaussian>) -> Result<Self, MixtureError> {
        if components.is_empty() {
            return Err(MixtureError::Empty);
        }
        if weights.len() != components.len() {
            return Err(MixtureError::WeightCount {
                count: weights.len(),
                components: components.len(),
            });
        }
        check_simplex(&weights)?;
        let dim = components[0].dim();
        for (i, c) in components.iter().enumerate() {
            if c.dim() != dim {
                return Err(MixtureError::DimensionMismatch {
                    component: i,
                    expected: dim,
                    found: c.dim(),
                });
            }
            DiagGaussian::check(i, &c.mean, &c.var)?;
        }
        Ok(DiagGMM { weights, components })
    }

    /// Single-component mixture.
    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self, MixtureError> {
        DiagGMM::new(vec![1.0], vec![DiagGaussian::new(mean, var)?])
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[DiagGaussian] {
        &self.components
    }

    /// Mixture with the first `d` coordinates of every component.
    pub fn marginal(&self, d: usize) -> Result<DiagGMM, MixtureError> {
        if d == 0 {
            return Err(MixtureError::ZeroDimension);
        }
        let components = self
            .components
            .iter()
            .map(|c| {
                if d > c.dim() {
                    return Err(MixtureError::SpectrumTooShort { needed: d, available: c.dim() });
                }
                Ok(DiagGaussian { mean: c.mean[..d].to_vec(), var: c.var[..d].to_vec() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DiagGMM { weights: self.weights.clone(), components })
    }

    /// Same components, different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<DiagGMM, MixtureError> {
        DiagGMM::new(weights, self.components.clone())
    }

    fn check_point(&self, x: &[f64]) -> Result<(), MixtureError> {
        if x.len() != self.dim() {
            return Err(MixtureError::PointDimension { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// Per-component `log w_i + log phi_i(x)`.
    pub fn component_log_joint(&self, x: &[f64]) -> Result<Vec<f64>, MixtureError> {
        self.check_point(x)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_pdf_unchecked(x))
            .collect())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64, MixtureError> {
        Ok(log_sum_exp(&self.component_log_joint(x)?))
    }

    /// Posterior component probabilities `w_i phi_i(x) / rho(x)`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>, MixtureError> {
        let mut logs = self.component_log_joint(x)?;
        softmax_in_place(&mut logs);
        Ok(logs)
    }

    /// `grad log rho(x) = -sum_i p_i(x) diag(v_i)^{-1} (x - m_i)`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>, MixtureError> {
        let resp = self.responsibilities(x)?;
        let mut out = vec![0.0; x.len()];
        for (p, c) in resp.iter().zip(&self.components) {
            for (o, ((&xj, &mj), &vj)) in out.iter_mut().zip(x.iter().zip(&c.mean).zip(&c.var)) {
                *o -= p * (xj - mj) / vj;
            }
        }
        Ok(out)
    }

    /// `n` i.i.d. draws as an `n x d` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        self.sample_with_labels(n, rng).0
    }

    /// Draws together with the component index that generated each row.
    pub fn sample_with_labels<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> (Array2<f64>, Vec<usize>) {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let mut labels = Vec::with_capacity(n);
        let sds = self.std_devs();
        for mut row in out.rows_mut() {
            let row = row.as_slice_mut().expect("standard layout");
            labels.push(self.draw_into(&sds, rng, row));
        }
        (out, labels)
    }

    /// Per-component standard deviations, the input of [`DiagGMM::draw_into`].
    pub(crate) fn std_devs(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.var.iter().map(|v| v.sqrt()).collect()).collect()
    }

    /// One draw written into `out`; returns the component label.
    pub(crate) fn draw_into<R: Rng + ?Sized>(
        &self,
        sds: &[Vec<f64>],
        rng: &mut R,
        out: &mut [f64],
    ) -> usize {
        let i = self.draw_component(rng);
        let c = &self.components[i];
        for (j, x) in out.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *x = c.mean[j] + sds[i][j] * z;
        }
        i
    }

    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.weights.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

fn check_simplex(weights: &[f64]) -> Result<(), MixtureError> {
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(MixtureError::NonPositiveWeight { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(MixtureError::WeightsNotNormalized { sum });
    }
    Ok(())
}

/// Stable `log sum exp(a_i)`; `-inf` only for an empty or all `-inf` input.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + a.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into probabilities in place.
pub fn softmax_in_place(a: &mut [f64]) {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in a.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in a.iter_mut() {
        *v /= total;
    }
}

/// Generative description of an infinite-dimensional diagonal mixture.
///
/// Component `i` has mean rule `means[i]` and variances `tau[i] * variances[i](j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<CoordinateRule>,
    pub variances: Vec<SpectrumSpec>,
    pub tau: Vec<f64>,
}

impl MixtureSpec {
    pub fn truncate(&self, d: usize) -> Result<DiagGMM, MixtureError> {
        build_truncated_mixture(&self.weights, &self.means, &self.variances, &self.tau, d)
    }
}

/// The `d`-coordinate truncation of a mixture described by coordinate rules.
///
/// Coordinates `1..=d` do not depend on `d`, so truncations at increasing
/// `d` extend each other.
pub fn build_truncated_mixture(
    weights: &[f64],
    mean_rules: &[CoordinateRule],
    var_specs: &[SpectrumSpec],
    tau: &[f64],
    d: usize,
) -> Result<DiagGMM, MixtureError> {
    if d == 0 {
        return Err(MixtureError::ZeroDimension);
    }
    let k = weights.len();
    for (len, _) in [(mean_rules.len(), "means"), (var_specs.len(), "variances"), (tau.len(), "tau")] {
        if len != k {
            return Err(MixtureError::WeightCount { count: k, components: len });
        }
    }
    let components = (0..k)
        .map(|i| {
            let mean = mean_rules[i].values(d).map_err(|e| match e {
                MixtureError::NonFiniteCoordinate { coordinate, value } => {
                    MixtureError::NonFiniteMean { component: i, coordinate, value }
                }
                other => other,
            })?;
            let var = (1..=d)
                .map(|j| {
                    let base = var_specs[i]
                        .eigenvalue(j)
                        .ok_or(MixtureError::SpectrumTooShort { needed: d, available: j - 1 })?;
                    let v = tau[i] * base;
                    if !(v >= VARIANCE_FLOOR) || !v.is_finite() {
                        return Err(MixtureError::NonPositiveVariance {
                            component: i,
                            coordinate: j,
                            value: v,
                        });
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DiagGaussian { mean, var })
        })
        .collect::<Result<Vec<_>, MixtureError>>()?;
    DiagGMM::new(weights.to_vec(), components)
}

/// Convolution with `N(0, level * C)`: every variance gains `level * lambda_j`.
pub fn smooth(gmm: &DiagGMM, c_spec: &SpectrumSpec, level: f64) -> Result<DiagGMM, MixtureError> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(MixtureError::NegativeLevel(level));
    }
    let lambda = c_spec.eigenvalues(gmm.dim())?;
    Ok(smooth_with(gmm, &lambda, level))
}

pub(crate) fn smooth_with(gmm: &DiagGMM, lambda: &[f64], level: f64) -> DiagGMM {
    if level == 0.0 {
        return gmm.clone();
    }
    let components = gmm
        .components
        .iter()
        .map(|c| DiagGaussian {
            mean: c.mean.clone(),
            var: c.var.iter().zip(lambda).map(|(v, l)| v + level * l).collect(),
        })
        .collect();
    DiagGMM { weights: gmm.weights.clone(), components }
}

/// Perturbation `(dw, dm, dsigma)` turning a mixture into a misspecified one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePerturbation {
    pub dweights: Vec<f64>,
    pub dmeans: Vec<CoordinateRule>,
    pub dvars: Vec<CoordinateRule>,
}

impl MixturePerturbation {
    pub fn zero(components: usize) -> Self {
        MixturePerturbation {
            dweights: vec![0.0; components],
            dmeans: vec![CoordinateRule::Zero; components],
            dvars: vec![CoordinateRule::Zero; components],
        }
    }

    /// Same variance perturbation on every component, weights and means untouched.
    pub fn variance_only(components: usize, dvar: CoordinateRule) -> Self {
        MixturePerturbation {
            dweights: vec![0.0; components],
            dmeans: vec![CoordinateRule::Zero; components],
            dvars: vec![dvar; components],
        }
    }

    pub fn weights_only(dweights: Vec<f64>) -> Self {
        let k = dweights.len();
        MixturePerturbation {
            dweights,
            dmeans: vec![CoordinateRule::Zero; k],
            dvars: vec![CoordinateRule::Zero; k],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dweights.iter().all(|w| *w == 0.0) && !self.has_component_perturbation()
    }

    pub fn has_component_perturbation(&self) -> bool {
        self.dmeans.iter().chain(&self.dvars).any(|r| !r.is_zero())
    }

    /// The misspecified mixture `sum (w+dw) N(m+dm, diag(v+dv))`.
    pub fn apply(&self, gmm: &DiagGMM) -> Result<DiagGMM, MixtureError> {
        let k = gmm.n_components();
        for len in [self.dweights.len(), self.dmeans.len(), self.dvars.len()] {
            if len != k {
                return Err(MixtureError::PerturbationShape { expected: k, found: len });
            }
        }
        let weights: Vec<f64> = gmm.weights.iter().zip(&self.dweights).map(|(w, dw)| w + dw).collect();
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0) {
                return Err(MixtureError::PerturbedWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(MixtureError::PerturbedWeightsNotNormalized { sum });
        }
        let d = gmm.dim();
        let components = gmm
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let dm = self.dmeans[i].values(d)?;
                let dv = self.dvars[i].values(d)?;
                let mean = c.mean.iter().zip(&dm).map(|(m, x)| m + x).collect();
                let var = c
                    .var
                    .iter()
                    .zip(&dv)
                    .enumerate()
                    .map(|(j, (v, x))| {
                        let nv = v + x;
                        if !(nv >= VARIANCE_FLOOR) {
                            return Err(MixtureError::PerturbedVariance {
                                component: i,
                                coordinate: j + 1,
                                value: nv,
                            });
                        }
                        Ok(nv)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(DiagGaussian { mean, var })
            })
            .collect::<Result<Vec<_>, MixtureError>>()?;
        DiagGMM::new(weights, components)
    }
}

/// Free-function form of [`MixturePerturbation::apply`].
pub fn apply_perturbation(
    gmm: &DiagGMM,
    pert: &MixturePerturbation,
) -> Result<DiagGMM, MixtureError> {
    pert.apply(gmm)
}

/// Flattened mixture parameters for repeated score evaluation at one
/// smoothing level. Buffers are reused across levels.
#[derive(Debug, Clone)]
pub struct ScoreKernel {
    dim: usize,
    log_norm: Vec<f64>,
    mean: Vec<f64>,
    inv_var: Vec<f64>,
}

impl ScoreKernel {
    pub fn new(gmm: &DiagGMM) -> Self {
        let mut k = ScoreKernel {
            dim: gmm.dim(),
            log_norm: vec![0.0; gmm.n_components()],
            mean: vec![0.0; gmm.n_components() * gmm.dim()],
            inv_var: vec![0.0; gmm.n_components() * gmm.dim()],
        };
        k.set_level(gmm, None, 0.0);
        k
    }

    /// Kernel of `smooth(gmm, lambda, level)`.
    pub fn smoothed(gmm: &DiagGMM, lambda: &[f64], level: f64) -> Self {
        let mut k = ScoreKernel::new(gmm);
        k.set_level(gmm, Some(lambda), level);
        k
    }

    pub fn set_level(&mut self, gmm: &DiagGMM, lambda: Option<&[f64]>, level: f64) {
        let d = self.dim;
        for (i, (c, w)) in gmm.components.iter().zip(&gmm.weights).enumerate() {
            let mut log_det = 0.0;
            for j in 0..d {
                let v = match lambda {
                    Some(l) => c.var[j] + level * l[j],
                    None => c.var[j],
                };
                self.inv_var[i * d + j] = 1.0 / v;
                self.mean[i * d + j] = c.mean[j];
                log_det += v.ln();
            }
            self.log_norm[i] = w.ln() - 0.5 * (log_det + d as f64 * LN_2PI);
        }
    }

    pub fn n_components(&self) -> usize {
        self.log_norm.len()
    }

    /// Writes the score at `x` into `out`. `scratch` needs `n_components * dim` slots.
    pub fn score_into(&self, x: &[f64], scratch: &mut [f64], logp: &mut [f64], out: &mut [f64]) {
        let d = self.dim;
        let k = self.log_norm.len();
        if k == 1 {
            for j in 0..d {
                out[j] = -(x[j] - self.mean[j]) * self.inv_var[j];
            }
            return;
        }
        for i in 0..k {
            let m = &self.mean[i * d..(i + 1) * d];
            let iv = &self.inv_var[i * d..(i + 1) * d];
            let s = &mut scratch[i * d..(i + 1) * d];
            let mut quad = 0.0;
            for j in 0..d {
                let r = x[j] - m[j];
                let g = r * iv[j];
                s[j] = g;
                quad += r * g;
            }
            logp[i] = self.log_norm[i] - 0.5 * quad;
        }
        softmax_in_place(&mut logp[..k]);
        out[..d].fill(0.0);
        for i in 0..k {
            let p = logp[i];
            let s = &scratch[i * d..(i + 1) * d];
            for j in 0..d {
                out[j] -= p * s[j];
            }
        }
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let k = self.n_components();
        let mut scratch = vec![0.0; k * self.dim];
        let mut logp = vec![0.0; k];
        let mut out = vec![0.0; self.dim];
        self.score_into(x, &mut scratch, &mut logp, &mut out);
        out
    }
}

/// `-0.5 log(2 pi)`, the standard normal log-density at zero.
pub fn std_normal_log_pdf_at_zero() -> f64 {
    -0.5 * (2.0 * PI).ln()
}
