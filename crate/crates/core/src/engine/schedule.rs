use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// Linear annealing schedule `theta_k = 2S (1 - k/(N-1))`, `k = 0..N-1`.
///
/// `kappa(k) = theta_k / (2S)` runs from 1 to 0 and the horizon is `T = (N-1) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    n_steps: usize,
    dt: f64,
    s_half: f64,
}

impl AnnealSchedule {
    pub fn new(n_steps: usize, dt: f64, s_half: f64) -> Result<Self, EngineError> {
        if n_steps < 2 {
            return Err(EngineError::TooFewSteps(n_steps));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(EngineError::BadStepSize(dt));
        }
        if !(s_half > 0.0) || !s_half.is_finite() {
            return Err(EngineError::BadSmoothingScale(s_half));
        }
        Ok(AnnealSchedule { n_steps, dt, s_half })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn s_half(&self) -> f64 {
        self.s_half
    }

    /// `theta_0 = 2S`, the initial smoothing level.
    pub fn theta0(&self) -> f64 {
        2.0 * self.s_half
    }

    pub fn kappa(&self, k: usize) -> f64 {
        let last = (self.n_steps - 1) as f64;
        (last - k.min(self.n_steps - 1) as f64) / last
    }

    /// Exact zero at `k = N-1`.
    pub fn theta(&self, k: usize) -> f64 {
        self.theta0() * self.kappa(k)
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_steps).map(|k| self.theta(k)).collect()
    }

    pub fn t_horizon(&self) -> f64 {
        (self.n_steps - 1) as f64 * self.dt
    }

    /// Number of Euler-Maruyama steps, `N - 1`.
    pub fn steps(&self) -> usize {
        self.n_steps - 1
    }
}

/// Free-function constructor.
pub fn make_schedule(n_steps: usize, dt: f64, s_half: f64) -> Result<AnnealSchedule, EngineError> {
    AnnealSchedule::new(n_steps, dt, s_half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_schedule() {
        let s = make_schedule(20_000, 9e-3, 20.0).unwrap();
        assert_eq!(s.theta(0), 40.0);
        assert_eq!(s.theta(19_999), 0.0);
        assert!((s.t_horizon() - 179.991).abs() < 1e-9);
    }

    #[test]
    fn endpoint_and_midpoint() {
        assert_eq!(make_schedule(2, 0.1, 3.0).unwrap().thetas(), vec![6.0, 0.0]);
        assert_eq!(make_schedule(3, 0.1, 1.0).unwrap().thetas(), vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(make_schedule(1, 0.1, 1.0), Err(EngineError::TooFewSteps(1)));
        assert!(make_schedule(5, 0.0, 1.0).is_err());
        assert!(make_schedule(5, 0.1, -1.0).is_err());
    }

    #[test]
    fn monotone_and_kappa_endpoints() {
        let s = make_schedule(101, 0.01, 2.5).unwrap();
        let t = s.thetas();
        assert!(t.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(s.kappa(0), 1.0);
        assert_eq!(s.kappa(100), 0.0);
    }
}
