#![allow(dead_code)]

use ald_core::{build_truncated_mixture, CoordinateRule, DiagGMM, SpectrumSpec};

/// Two modes at `0` and `10 e_1`, weights `(0.75, 0.25)`, variances
/// `tau_i * j^-alpha` with `tau = (1.2, 2)`.
pub fn two_mode_target(alpha: f64, d: usize) -> DiagGMM {
    build_truncated_mixture(
        &[0.75, 0.25],
        &[CoordinateRule::Zero, CoordinateRule::sparse(vec![(1, 10.0)])],
        &[SpectrumSpec::power_law(1.0, alpha), SpectrumSpec::power_law(1.0, alpha)],
        &[1.2, 2.0],
        d,
    )
    .unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
