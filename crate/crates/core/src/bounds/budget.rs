use serde::{Deserialize, Serialize};

use super::{bcomp_bound, bresp_upper, init_kl_bound, kd_constant, BoundInputs};
use crate::error::BoundsError;

pub const DEFAULT_GRID_POINTS: usize = 512;

/// Upper-bound budget `KL <= E_init + E_score + E_bias`, line by line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub e_init: f64,
    /// `int_0^T B_comp dt`.
    pub score_comp: f64,
    /// `int_0^T B_resp dt` with the relaxed envelope.
    pub score_resp_envelope: f64,
    /// Same with the exact-zero shortcut for unperturbed components.
    pub score_resp_tightened: f64,
    pub kd: f64,
    /// `2 K_d / T`, an upper bound on the bias term rather than its infimum.
    pub bias: f64,
}

impl ErrorBudget {
    pub fn total_envelope(&self) -> f64 {
        self.e_init + self.score_comp + self.score_resp_envelope + self.bias
    }

    pub fn total_tightened(&self) -> f64 {
        self.e_init + self.score_comp + self.score_resp_tightened + self.bias
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    let n = values.len();
    h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1]))
}

/// Budget for horizon `t_horizon`.
///
/// `init` describes the initial mismatch (its `kappa` is ignored); `score`
/// describes the score model and is re-evaluated on a uniform `kappa` grid.
/// Since `t = (1 - kappa) T`, every time integral is `T` times a `kappa` integral.
pub fn error_budget(
    init: &BoundInputs,
    score: &BoundInputs,
    t_horizon: f64,
    grid_points: usize,
) -> Result<ErrorBudget, BoundsError> {
    if !(t_horizon > 0.0) {
        return Err(BoundsError::BadHorizon(t_horizon));
    }
    if grid_points < 2 {
        return Err(BoundsError::BadGrid);
    }
    let h = 1.0 / (grid_points - 1) as f64;
    let mut comp = Vec::with_capacity(grid_points);
    let mut env = Vec::with_capacity(grid_points);
    let mut tight = Vec::with_capacity(grid_points);
    for g in 0..grid_points {
        let at = score.with_kappa((g as f64 * h).min(1.0))?;
        comp.push(bcomp_bound(&at));
        let r = bresp_upper(&at);
        env.push(r.envelope);
        tight.push(r.tightened);
    }
    let kd = kd_constant(score);
    Ok(ErrorBudget {
        e_init: init_kl_bound(init)?,
        score_comp: t_horizon * trapezoid(&comp, h),
        score_resp_envelope: t_horizon * trapezoid(&env, h),
        score_resp_tightened: t_horizon * trapezoid(&tight, h),
        kd,
        bias: 2.0 * kd / t_horizon,
    })
}
