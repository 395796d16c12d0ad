//! Annealed Langevin simulation: schedule, drifts, Euler-Maruyama stepping
//! and deterministic parallel chains.

mod drift;
mod run;
mod schedule;

pub use drift::{drift_exact, drift_ideal, drift_misspecified, em_step};
pub use run::{
    chain_rng, init_exact_smoothed, run, run_chains, AldConfig, ChainBatch, DriftMode, InitMode,
    RunOptions, RunOutput,
};
pub use schedule::{make_schedule, AnnealSchedule};
