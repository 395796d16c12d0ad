//! One-dimensional likelihood-ratio moments and tilted Gaussians.
//!
//! With `phi = N(m, v)`, `phi~ = N(mt, vt)`, `r = phi / phi~`, `kappa = vt / v`
//! and `D(p) = p kappa - (p - 1)`, the moment `E_{phi~}[r^p]` is finite iff
//! `D(p) > 0`, and `r^p phi~` normalizes to `N(m_p, v_p)`.

use crate::error::BoundsError;

/// `D(p) = p kappa - (p - 1)`.
pub fn tilt_denominator(p: f64, v: f64, vt: f64) -> f64 {
    p * (vt / v) - (p - 1.0)
}

/// `ln E_{phi~}[r^p]`, or `+inf` when `D(p) <= 0`.
pub fn log_ratio_p_moment(p: f64, v: f64, vt: f64, dm: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    let kappa = vt / v;
    let den = p * kappa - (p - 1.0);
    if !(den > 0.0) {
        return f64::INFINITY;
    }
    0.5 * p * kappa.ln() - 0.5 * den.ln() + p * (p - 1.0) * dm * dm / (2.0 * v * den)
}

/// `E_{phi~}[(phi/phi~)^p] = kappa^{p/2} / sqrt(D) * exp(p (p-1) dm^2 / (2 v D))`.
pub fn ratio_p_moment(p: f64, v: f64, vt: f64, dm: f64) -> f64 {
    log_ratio_p_moment(p, v, vt, dm).exp()
}

/// Second moment in its direct form `(vt/v) / sqrt(2 vt/v - 1) * exp(dm^2 / (2 vt - v))`.
pub fn ratio_second_moment(v: f64, vt: f64, dm: f64) -> f64 {
    let kappa = vt / v;
    if !(2.0 * vt - v > 0.0) {
        return f64::INFINITY;
    }
    kappa / (2.0 * kappa - 1.0).sqrt() * (dm * dm / (2.0 * vt - v)).exp()
}

/// Mean and variance of the tilted law `r^p phi~ / E[r^p]`.
pub fn tilted_params(p: f64, m: f64, mt: f64, v: f64, vt: f64) -> Result<(f64, f64), BoundsError> {
    let kappa = vt / v;
    let den = p * kappa - (p - 1.0);
    if !(den > 0.0) {
        return Err(BoundsError::TiltUndefined { p, denominator: den });
    }
    let dm = mt - m;
    Ok((mt - p * kappa / den * dm, vt / den))
}

/// `E_{phi~}[||Gamma^{1/2} S~||^4] = (sum gamma/vt)^2 + 2 sum gamma^2/vt^2`.
pub fn score_fourth_moment(gammas: &[f64], vts: &[f64]) -> f64 {
    let mut first = 0.0;
    let mut second = 0.0;
    for (g, v) in gammas.iter().zip(vts) {
        first += g / v;
        second += g * g / (v * v);
    }
    first * first + 2.0 * second
}

/// Upper bound on the tilted fourth moment `E_{phi~^(p)}[||Gamma^{1/2} S~||^4]`
/// for one component, coordinates given as `(gamma, v, vt, dm)`.
///
/// `+inf` when some `D(p) <= 0`.
pub fn tilted_score_fourth(p: f64, coords: impl Iterator<Item = (f64, f64, f64, f64)>) -> f64 {
    let mut first = 0.0;
    let mut second = 0.0;
    for (g, v, vt, dm) in coords {
        let kappa = vt / v;
        let den = p * kappa - (p - 1.0);
        if !(den > 0.0) {
            return f64::INFINITY;
        }
        let a = p * kappa / den;
        let mu2 = a * a * dm * dm;
        first += g * (1.0 / (den * vt) + mu2 / (vt * vt));
        second += g * g
            * (3.0 / (den * den * vt * vt) + 6.0 * mu2 / (den * vt * vt * vt) + mu2 * mu2 / vt.powi(4));
    }
    first * first + second
}
