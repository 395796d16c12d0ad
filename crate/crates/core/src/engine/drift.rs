//! Drift providers and the Euler-Maruyama update.

use crate::error::EngineError;
use crate::mixture::{DiagGMM, MixturePerturbation, ScoreKernel};
use crate::spectrum::SpectrumSpec;

fn check_theta(theta: f64) -> Result<(), EngineError> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(crate::error::MixtureError::NegativeLevel(theta).into());
    }
    Ok(())
}

fn smoothed_score(
    target: &DiagGMM,
    c_base: &SpectrumSpec,
    theta: f64,
    x: &[f64],
) -> Result<Vec<f64>, EngineError> {
    check_theta(theta)?;
    if x.len() != target.dim() {
        return Err(crate::error::MixtureError::PointDimension {
            expected: target.dim(),
            found: x.len(),
        }
        .into());
    }
    let lambda = c_base.eigenvalues(target.dim())?;
    Ok(ScoreKernel::smoothed(target, &lambda, theta).score(x))
}

/// Score of the target smoothed to level `theta`, before preconditioning.
pub fn drift_exact(
    target: &DiagGMM,
    c_base: &SpectrumSpec,
    theta: f64,
    x: &[f64],
) -> Result<Vec<f64>, EngineError> {
    smoothed_score(target, c_base, theta, x)
}

/// Exact score of the smoothed perturbed mixture.
pub fn drift_misspecified(
    target: &DiagGMM,
    pert: &MixturePerturbation,
    c_base: &SpectrumSpec,
    theta: f64,
    x: &[f64],
) -> Result<Vec<f64>, EngineError> {
    let perturbed = pert.apply(target)?;
    smoothed_score(&perturbed, c_base, theta, x)
}

/// Preconditioned drift with the transport correction that keeps the law on
/// the annealing path: `(gamma_j + theta0 * lambda_j / (2T)) * s_j`.
///
/// `theta0 * c_base` is the full smoothing covariance at the start of the path.
pub fn drift_ideal(
    target: &DiagGMM,
    c_base: &SpectrumSpec,
    theta: f64,
    theta0: f64,
    t_horizon: f64,
    gamma: &SpectrumSpec,
    x: &[f64],
) -> Result<Vec<f64>, EngineError> {
    if !(t_horizon > 0.0) {
        return Err(EngineError::BadHorizon(t_horizon));
    }
    let coef = ideal_coefficients(gamma, c_base, theta0, t_horizon, target.dim())?;
    let s = smoothed_score(target, c_base, theta, x)?;
    Ok(s.iter().zip(&coef).map(|(s, c)| c * s).collect())
}

pub(crate) fn ideal_coefficients(
    gamma: &SpectrumSpec,
    c_base: &SpectrumSpec,
    theta0: f64,
    t_horizon: f64,
    d: usize,
) -> Result<Vec<f64>, EngineError> {
    let g = gamma.eigenvalues(d)?;
    let l = c_base.eigenvalues(d)?;
    Ok(g.iter().zip(&l).map(|(g, l)| g + theta0 * l / (2.0 * t_horizon)).collect())
}

/// One Euler-Maruyama step `x + dt * drift + sqrt(2 dt gamma) * noise`.
///
/// `drift` is already preconditioned. `step` only labels errors.
pub fn em_step(
    x: &[f64],
    drift: &[f64],
    gamma: &[f64],
    dt: f64,
    noise: &[f64],
    step: usize,
) -> Result<Vec<f64>, EngineError> {
    let d = x.len();
    if drift.len() != d || gamma.len() != d || noise.len() != d {
        return Err(EngineError::Shape(format!(
            "x {d}, drift {}, gamma {}, noise {}",
            drift.len(),
            gamma.len(),
            noise.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(EngineError::BadStepSize(dt));
    }
    let mut out = x.to_vec();
    for j in 0..d {
        if !drift[j].is_finite() || !noise[j].is_finite() {
            return Err(EngineError::NonFiniteStep { step, coordinate: j + 1 });
        }
        out[j] += dt * drift[j] + (2.0 * dt * gamma[j]).sqrt() * noise[j];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::build_truncated_mixture;
    use crate::spectrum::CoordinateRule;

    fn std_normal() -> DiagGMM {
        DiagGMM::gaussian(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn exact_drift_simple() {
        let g = std_normal();
        let c = SpectrumSpec::constant(1.0);
        assert_eq!(drift_exact(&g, &c, 0.0, &[2.0]).unwrap(), vec![-2.0]);
        assert_eq!(drift_exact(&g, &c, 1.0, &[2.0]).unwrap(), vec![-1.0]);
        assert!(drift_exact(&g, &c, -1.0, &[2.0]).is_err());
    }

    #[test]
    fn zero_perturbation_matches_exact() {
        let g = build_truncated_mixture(
            &[0.75, 0.25],
            &[CoordinateRule::Zero, CoordinateRule::sparse(vec![(1, 10.0)])],
            &[SpectrumSpec::power_law(1.0, 1.25), SpectrumSpec::power_law(1.0, 1.25)],
            &[1.2, 2.0],
            3,
        )
        .unwrap();
        let c = SpectrumSpec::power_law(1.0, 2.7);
        let z = MixturePerturbation::zero(2);
        for x in [[0.0, 1.0, -1.0], [5.0, 0.2, 0.3], [11.0, -2.0, 0.0]] {
            assert_eq!(drift_exact(&g, &c, 7.0, &x).unwrap(), drift_misspecified(&g, &z, &c, 7.0, &x).unwrap());
        }
    }

    #[test]
    fn weight_perturbation_of_identical_components_is_invisible() {
        let comp = crate::mixture::DiagGaussian::new(vec![1.0, 2.0], vec![0.5, 1.5]).unwrap();
        let g = DiagGMM::new(vec![0.75, 0.25], vec![comp.clone(), comp]).unwrap();
        let p = MixturePerturbation::weights_only(vec![-0.65, 0.65]);
        let c = SpectrumSpec::constant(1.0);
        let x = [0.3, -4.0];
        let a = drift_exact(&g, &c, 2.0, &x).unwrap();
        let b = drift_misspecified(&g, &p, &c, 2.0, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn ideal_drift_direct_substitution() {
        // gamma = 1, effective lambda = theta0 * 1 = 2, T = 1, theta = 0
        let g = std_normal();
        let d = drift_ideal(&g, &SpectrumSpec::constant(1.0), 0.0, 2.0, 1.0, &SpectrumSpec::constant(1.0), &[1.5])
            .unwrap();
        assert_eq!(d, vec![-3.0]);
        assert!(drift_ideal(&g, &SpectrumSpec::constant(1.0), 0.0, 2.0, 0.0, &SpectrumSpec::constant(1.0), &[1.5]).is_err());
    }

    #[test]
    fn ideal_drift_vanishing_correction() {
        let g = std_normal();
        let c = SpectrumSpec::constant(1.0);
        let gamma = SpectrumSpec::constant(0.5);
        let d = drift_ideal(&g, &c, 0.5, 40.0, 1e15, &gamma, &[2.0]).unwrap();
        let e = drift_exact(&g, &c, 0.5, &[2.0]).unwrap();
        assert!((d[0] - 0.5 * e[0]).abs() < 1e-12);
    }

    #[test]
    fn em_step_cases() {
        assert_eq!(em_step(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 1.0], 0.1, &[0.0, 0.0], 0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(em_step(&[0.0], &[-0.0], &[1.0], 0.5, &[1.0], 0).unwrap(), vec![1.0]);
        assert_eq!(
            em_step(&[0.0, 0.0], &[0.0, f64::NAN], &[1.0, 1.0], 0.5, &[1.0, 1.0], 17),
            Err(EngineError::NonFiniteStep { step: 17, coordinate: 2 })
        );
        assert!(em_step(&[0.0], &[0.0, 1.0], &[1.0], 0.5, &[1.0], 0).is_err());
    }
}
