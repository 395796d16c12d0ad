//! Closed-form horizon, initialization and score-error bounds.
//!
//! All smoothing eigenvalues passed here are the effective ones: the full
//! smoothing covariance at the start of the path, i.e. `theta_0 * c_base`.
//! Diverging quantities are returned as `f64::INFINITY`, not as errors.

mod budget;
mod conditions;
mod moments;

pub use budget::{error_budget, ErrorBudget, DEFAULT_GRID_POINTS};
pub use conditions::{
    condition_report, ConditionInputs, ConditionRecord, ConditionReport, Verdict,
};
pub use moments::{
    log_ratio_p_moment, ratio_p_moment, ratio_second_moment, score_fourth_moment,
    tilt_denominator, tilted_params, tilted_score_fourth,
};

use serde::{Deserialize, Serialize};

use crate::error::BoundsError;
use crate::mixture::DiagGMM;

/// The 48 in `|ln r|^4 (r^4 + r^-4) <= 48 (1 + r^8 + r^-8)`.
pub const LOG_RATIO_CONSTANT: f64 = 48.0;

/// Exact and perturbed mixture parameters at one annealing fraction `kappa`.
///
/// Component arrays are `[component][coordinate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub weights: Vec<f64>,
    pub perturbed_weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub perturbed_means: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub perturbed_sigma: Vec<Vec<f64>>,
    /// Effective smoothing eigenvalues.
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa: f64,
}

impl BoundInputs {
    pub fn from_mixtures(
        target: &DiagGMM,
        perturbed: &DiagGMM,
        lambda_eff: Vec<f64>,
        gamma: Vec<f64>,
        kappa: f64,
    ) -> Result<Self, BoundsError> {
        let split = |g: &DiagGMM| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
            g.components().iter().map(|c| (c.mean().to_vec(), c.var().to_vec())).unzip()
        };
        let (means, sigma) = split(target);
        let (perturbed_means, perturbed_sigma) = split(perturbed);
        let inputs = BoundInputs {
            weights: target.weights().to_vec(),
            perturbed_weights: perturbed.weights().to_vec(),
            means,
            perturbed_means,
            sigma,
            perturbed_sigma,
            lambda: lambda_eff,
            gamma,
            kappa,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Same inputs with no perturbation.
    pub fn unperturbed(target: &DiagGMM, lambda_eff: Vec<f64>, gamma: Vec<f64>, kappa: f64) -> Result<Self, BoundsError> {
        BoundInputs::from_mixtures(target, target, lambda_eff, gamma, kappa)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self, BoundsError> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(BoundsError::KappaOutOfRange(kappa));
        }
        Ok(BoundInputs { kappa, ..self.clone() })
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(BoundsError::KappaOutOfRange(self.kappa));
        }
        let k = self.weights.len();
        let d = self.lambda.len();
        if k == 0 || d == 0 {
            return Err(BoundsError::Shape("empty mixture or zero dimension".into()));
        }
        let rows = [&self.means, &self.perturbed_means, &self.sigma, &self.perturbed_sigma];
        if self.perturbed_weights.len() != k
            || self.gamma.len() != d
            || rows.iter().any(|r| r.len() != k || r.iter().any(|row| row.len() != d))
        {
            return Err(BoundsError::Shape(format!("expected {k} components of dimension {d}")));
        }
        for (index, &value) in self.perturbed_weights.iter().enumerate() {
            if !(value > 0.0) {
                return Err(BoundsError::ZeroPerturbedWeight { index, value });
            }
        }
        for (i, (s, st)) in self.sigma.iter().zip(&self.perturbed_sigma).enumerate() {
            for j in 0..d {
                for value in [s[j], st[j]] {
                    if !(value > 0.0) {
                        return Err(BoundsError::NonPositiveVariance { component: i, coordinate: j + 1, value });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// `v_ij = sigma_ij + kappa lambda_j`.
    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.sigma[i][j] + self.kappa * self.lambda[j]
    }

    /// `v~_ij = sigma_ij + dsigma_ij + kappa lambda_j`.
    pub fn vt(&self, i: usize, j: usize) -> f64 {
        self.perturbed_sigma[i][j] + self.kappa * self.lambda[j]
    }

    pub fn dm(&self, i: usize, j: usize) -> f64 {
        self.perturbed_means[i][j] - self.means[i][j]
    }

    pub fn dsigma(&self, i: usize, j: usize) -> f64 {
        self.perturbed_sigma[i][j] - self.sigma[i][j]
    }

    /// Whether any mean or variance differs; weights are not considered.
    pub fn has_component_perturbation(&self) -> bool {
        self.means != self.perturbed_means || self.sigma != self.perturbed_sigma
    }
}

/// `K_d = (1/16) sum_i w_i sum_j (lambda_j / gamma_j) ln(1 + lambda_j / sigma_ij)`.
pub fn kd_constant(inputs: &BoundInputs) -> f64 {
    let mut total = 0.0;
    for (w, s) in inputs.weights.iter().zip(&inputs.sigma) {
        let mut inner = 0.0;
        for j in 0..inputs.dim() {
            let l = inputs.lambda[j];
            inner += l / inputs.gamma[j] * (l / s[j]).ln_1p();
        }
        total += w * inner;
    }
    total / 16.0
}

/// `T = K_d / epsilon`.
pub fn horizon(kd: f64, epsilon: f64) -> Result<f64, BoundsError> {
    if !(epsilon > 0.0) {
        return Err(BoundsError::BadEpsilon(epsilon));
    }
    Ok(kd / epsilon)
}

/// `KL(w || w~) = sum w_i ln(w_i / w~_i)`.
pub fn weight_kl(w: &[f64], wt: &[f64]) -> Result<f64, BoundsError> {
    if w.len() != wt.len() {
        return Err(BoundsError::Shape(format!("{} weights vs {}", w.len(), wt.len())));
    }
    let mut total = 0.0;
    for (index, (a, b)) in w.iter().zip(wt).enumerate() {
        if !(*b > 0.0) {
            return Err(BoundsError::ZeroPerturbedWeight { index, value: *b });
        }
        if *a > 0.0 {
            total += a * (a / b).ln();
        }
    }
    Ok(total)
}

/// Gaussian KL between component `i` and its perturbation at the fully
/// smoothed level (`kappa = 1` regardless of `inputs.kappa`).
pub fn component_init_kl(inputs: &BoundInputs, i: usize) -> Result<f64, BoundsError> {
    if i >= inputs.n_components() {
        return Err(BoundsError::Shape(format!("component {i} of {}", inputs.n_components())));
    }
    let mut total = 0.0;
    for j in 0..inputs.dim() {
        let base = inputs.sigma[i][j] + inputs.lambda[j];
        let ds = inputs.dsigma(i, j);
        let full = base + ds;
        if !(full > 0.0) {
            return Err(BoundsError::NonPositiveVariance { component: i, coordinate: j + 1, value: full });
        }
        let dm = inputs.dm(i, j);
        total += dm * dm / full + (ds / base).ln_1p() - ds / full;
    }
    Ok(0.5 * total)
}

/// `KL(w || w~) + sum_i w_i KL(phi_i || phi~_i)` at the initial level.
pub fn init_kl_bound(inputs: &BoundInputs) -> Result<f64, BoundsError> {
    let mut total = weight_kl(&inputs.weights, &inputs.perturbed_weights)?;
    for (i, w) in inputs.weights.iter().enumerate() {
        total += w * component_init_kl(inputs, i)?;
    }
    Ok(total)
}

/// `KL(p || q) <= KL(w || w~) + sum_i w_i KL(p_i || q_i)` for two mixtures
/// with paired components.
pub fn mixture_kl_bound(p: &DiagGMM, q: &DiagGMM) -> Result<f64, BoundsError> {
    if p.n_components() != q.n_components() || p.dim() != q.dim() {
        return Err(BoundsError::Shape(format!(
            "{} x {} vs {} x {}",
            p.n_components(),
            p.dim(),
            q.n_components(),
            q.dim()
        )));
    }
    let mut total = weight_kl(p.weights(), q.weights())?;
    for (w, (a, b)) in p.weights().iter().zip(p.components().iter().zip(q.components())) {
        let mut kl = 0.0;
        for j in 0..p.dim() {
            let (v, vt) = (a.var()[j], b.var()[j]);
            let dm = b.mean()[j] - a.mean()[j];
            kl += v / vt - 1.0 + (vt / v).ln() + dm * dm / vt;
        }
        total += w * 0.5 * kl;
    }
    Ok(total)
}

/// `2 sum_i w_i sum_j gamma_j [dm^2 + dsigma^2 / v] / v~^2`.
pub fn bcomp_bound(inputs: &BoundInputs) -> f64 {
    let mut total = 0.0;
    for (i, w) in inputs.weights.iter().enumerate() {
        let mut inner = 0.0;
        for j in 0..inputs.dim() {
            let dm = inputs.dm(i, j);
            let ds = inputs.dsigma(i, j);
            let vt = inputs.vt(i, j);
            inner += inputs.gamma[j] * (dm * dm + ds * ds / inputs.v(i, j)) / (vt * vt);
        }
        total += w * inner;
    }
    2.0 * total
}

/// Weight-mismatch bound with exponent 3:
/// `(sum dw^2 / w~^3) * sum_l w_l sum_i w~_i sum_h gamma_h [v_lh + (m_lh - m~_ih)^2] / v~_ih^2`.
pub fn delta1_bound(inputs: &BoundInputs) -> f64 {
    let factor: f64 = inputs
        .weights
        .iter()
        .zip(&inputs.perturbed_weights)
        .map(|(w, wt)| (wt - w).powi(2) / wt.powi(3))
        .sum();
    if factor == 0.0 {
        return 0.0;
    }
    let k = inputs.n_components();
    let mut c1 = 0.0;
    for l in 0..k {
        let mut over_i = 0.0;
        for i in 0..k {
            let mut over_h = 0.0;
            for h in 0..inputs.dim() {
                let gap = inputs.means[l][h] - inputs.perturbed_means[i][h];
                let vt = inputs.vt(i, h);
                over_h += inputs.gamma[h] * (inputs.v(l, h) + gap * gap) / (vt * vt);
            }
            over_i += inputs.perturbed_weights[i] * over_h;
        }
        c1 += inputs.weights[l] * over_i;
    }
    factor * c1
}

/// `ln prod_j E[r_ij^p]` for component `i`.
fn log_component_moment(inputs: &BoundInputs, i: usize, p: f64) -> f64 {
    (0..inputs.dim())
        .map(|j| log_ratio_p_moment(p, inputs.v(i, j), inputs.vt(i, j), inputs.dm(i, j)))
        .sum()
}

/// `sum_k w~_k c_k^2 prod_j E[r_kj^2]` with `c_k = w_k / w~_k`.
pub fn r2_mixture_bound(inputs: &BoundInputs) -> f64 {
    let mut total = 0.0;
    for (i, (w, wt)) in inputs.weights.iter().zip(&inputs.perturbed_weights).enumerate() {
        let c = w / wt;
        total += wt * c * c * log_component_moment(inputs, i, 2.0).exp();
    }
    total
}

fn tilted_fourth(inputs: &BoundInputs, i: usize, p: f64) -> f64 {
    tilted_score_fourth(
        p,
        (0..inputs.dim()).map(|j| (inputs.gamma[j], inputs.v(i, j), inputs.vt(i, j), inputs.dm(i, j))),
    )
}

/// Tilted score fourth-moment bound for component `i`.
pub fn tilted_score_fourth_bound(p: f64, inputs: &BoundInputs, i: usize) -> f64 {
    tilted_fourth(inputs, i, p)
}

/// Relaxed bound on the component-density term of the responsibility error.
///
/// `(E R^2)^{1/2} (sum_i w~_i c_i^4 48 [E||S~||^4 + M^(8) E^(8) + M^(-8) E^(-8)])^{1/2}`.
pub fn bphi_envelope(inputs: &BoundInputs) -> f64 {
    let r2 = r2_mixture_bound(inputs);
    let mut main = 0.0;
    for (i, (w, wt)) in inputs.weights.iter().zip(&inputs.perturbed_weights).enumerate() {
        let c = w / wt;
        let vts: Vec<f64> = (0..inputs.dim()).map(|j| inputs.vt(i, j)).collect();
        let mut term = score_fourth_moment(&inputs.gamma, &vts);
        for p in [8.0, -8.0] {
            let log_m = log_component_moment(inputs, i, p);
            if log_m.is_infinite() {
                return f64::INFINITY;
            }
            term += log_m.exp() * tilted_fourth(inputs, i, p);
        }
        main += wt * c.powi(4) * LOG_RATIO_CONSTANT * term;
    }
    (r2 * main).sqrt()
}

/// Responsibility-error bound `3 (B_w + B_phi + B_mix)` with `B_mix = B_w + B_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrespBound {
    /// Uses the relaxed `B_phi` envelope throughout.
    pub envelope: f64,
    /// `B_phi` replaced by its exact value 0 when means and variances are unperturbed.
    pub tightened: f64,
    pub b_w: f64,
    pub b_phi: f64,
}

pub fn bresp_upper(inputs: &BoundInputs) -> BrespBound {
    let b_w = delta1_bound(inputs);
    let b_phi = bphi_envelope(inputs);
    let b_phi_tight = if inputs.has_component_perturbation() { b_phi } else { 0.0 };
    BrespBound {
        envelope: 6.0 * (b_w + b_phi),
        tightened: 6.0 * (b_w + b_phi_tight),
        b_w,
        b_phi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(sigma: f64, dsigma: f64, dm: f64, lambda: f64, gamma: f64, kappa: f64) -> BoundInputs {
        BoundInputs {
            weights: vec![1.0],
            perturbed_weights: vec![1.0],
            means: vec![vec![0.0]],
            perturbed_means: vec![vec![dm]],
            sigma: vec![vec![sigma]],
            perturbed_sigma: vec![vec![sigma + dsigma]],
            lambda: vec![lambda],
            gamma: vec![gamma],
            kappa,
        }
    }

    #[test]
    fn kd_single_term() {
        let k = kd_constant(&single(1.0, 0.0, 0.0, 1.0, 1.0, 1.0));
        assert!((k - std::f64::consts::LN_2 / 16.0).abs() < 1e-16);
        assert!((k - 0.043_321_698_784_996_58).abs() < 1e-15);
        assert!(kd_constant(&single(1.0, 0.0, 0.0, 1e-300, 1.0, 1.0)) < 1e-298);
    }

    #[test]
    fn horizon_cases() {
        assert_eq!(horizon(0.0, 0.3).unwrap(), 0.0);
        assert!((horizon(0.043_321_7, 0.1).unwrap() - 0.433_217).abs() < 1e-12);
        assert!(horizon(1.0, 0.0).is_err());
    }

    #[test]
    fn weight_kl_cases() {
        assert_eq!(weight_kl(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(weight_kl(&[1.0], &[1.0]).unwrap(), 0.0);
        assert!(weight_kl(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn component_kl_by_hand() {
        assert_eq!(component_init_kl(&single(1.0, 0.0, 0.0, 1.0, 1.0, 1.0), 0).unwrap(), 0.0);
        assert!((component_init_kl(&single(1.0, 0.0, 2.0, 1.0, 1.0, 1.0), 0).unwrap() - 1.0).abs() < 1e-15);
        let v = component_init_kl(&single(1.0, 1.0, 0.0, 0.0, 1.0, 1.0), 0).unwrap();
        assert!((v - 0.5 * (std::f64::consts::LN_2 - 0.5)).abs() < 1e-16);
    }

    #[test]
    fn singleton_init_bound_is_component_kl() {
        let b = single(0.5, 0.2, 1.5, 2.0, 1.0, 1.0);
        assert_eq!(init_kl_bound(&b).unwrap(), component_init_kl(&b, 0).unwrap());
    }

    #[test]
    fn mixture_bound_agrees_with_init_bound() {
        let target = DiagGMM::new(
            vec![0.6, 0.4],
            vec![
                crate::mixture::DiagGaussian::new(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap(),
                crate::mixture::DiagGaussian::new(vec![3.0, 0.0], vec![2.0, 0.25]).unwrap(),
            ],
        )
        .unwrap();
        let pert = crate::mixture::MixturePerturbation {
            dweights: vec![0.1, -0.1],
            dmeans: vec![crate::spectrum::CoordinateRule::Explicit { values: vec![0.2, -0.1] }; 2],
            dvars: vec![crate::spectrum::CoordinateRule::Explicit { values: vec![0.3, 0.05] }; 2],
        };
        let perturbed = pert.apply(&target).unwrap();
        let lambda = vec![2.0, 0.5];
        let b = BoundInputs::from_mixtures(&target, &perturbed, lambda.clone(), vec![1.0, 1.0], 1.0).unwrap();
        let c = crate::spectrum::SpectrumSpec::explicit(lambda);
        let p0 = crate::mixture::smooth(&target, &c, 1.0).unwrap();
        let q0 = crate::mixture::smooth(&perturbed, &c, 1.0).unwrap();
        let a = mixture_kl_bound(&p0, &q0).unwrap();
        let e = init_kl_bound(&b).unwrap();
        assert!((a - e).abs() < 1e-14, "{a} vs {e}");
        assert_eq!(mixture_kl_bound(&p0, &p0).unwrap(), 0.0);
    }

    #[test]
    fn bcomp_by_hand() {
        assert_eq!(bcomp_bound(&single(1.0, 0.0, 0.0, 1.0, 1.0, 0.0)), 0.0);
        assert_eq!(bcomp_bound(&single(1.0, 0.0, 1.0, 1.0, 1.0, 0.0)), 2.0);
    }

    #[test]
    fn zero_perturbation_collapse() {
        let b = single(1.0, 0.0, 0.0, 3.0, 0.5, 0.4);
        assert_eq!(delta1_bound(&b), 0.0);
        assert_eq!(r2_mixture_bound(&b), 1.0);
        let r = bresp_upper(&b);
        assert_eq!(r.tightened, 0.0);
        assert!(r.envelope > 0.0 && r.envelope.is_finite());
    }

    #[test]
    fn band_violation_is_infinite() {
        // kappa_ij = 0.8 at kappa = 0
        let b = single(1.0, -0.2, 0.0, 1.0, 1.0, 0.0);
        assert!(bresp_upper(&b).envelope.is_infinite());
        let b = single(1.0, -0.6, 0.0, 1.0, 1.0, 0.0);
        assert!(r2_mixture_bound(&b).is_infinite());
    }

    #[test]
    fn validation() {
        let mut b = single(1.0, 0.0, 0.0, 1.0, 1.0, 0.0);
        assert!(b.validate().is_ok());
        b.kappa = 1.5;
        assert!(matches!(b.validate(), Err(BoundsError::KappaOutOfRange(_))));
        let mut b = single(1.0, -1.0, 0.0, 1.0, 1.0, 0.0);
        assert!(matches!(b.validate(), Err(BoundsError::NonPositiveVariance { .. })));
        b.perturbed_sigma[0][0] = 1.0;
        b.perturbed_weights[0] = 0.0;
        assert!(matches!(b.validate(), Err(BoundsError::ZeroPerturbedWeight { .. })));
    }
}
