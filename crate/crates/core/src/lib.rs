//! Preconditioned annealed Langevin dynamics for truncated diagonal Gaussian
//! mixtures, closed-form error bounds, and a kNN divergence estimator.

pub mod bounds;
pub mod engine;
pub mod error;
pub mod knn;
pub mod mixture;
pub mod spectrum;

pub use engine::{AldConfig, AnnealSchedule, ChainBatch, DriftMode, InitMode};
pub use knn::{knn_distances, knn_kl, knn_kl_multi, KLEstimate};
pub use error::{BoundsError, EngineError, KnnError, MixtureError};
pub use mixture::{
    apply_perturbation, build_truncated_mixture, smooth, DiagGMM, DiagGaussian,
    MixturePerturbation, MixtureSpec, ScoreKernel,
};
pub use spectrum::{CoordinateRule, SpectrumSpec};
