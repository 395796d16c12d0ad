use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("mixture needs at least one component")]
    Empty,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("component {component}: dimension {found}, expected {expected}")]
    DimensionMismatch { component: usize, expected: usize, found: usize },
    #[error("point has length {found}, mixture dimension is {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("weight {index} is {value}, weights must be strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightsNotNormalized { sum: f64 },
    #[error("{count} weights for {components} components")]
    WeightCount { count: usize, components: usize },
    #[error("component {component}, coordinate {coordinate}: variance {value} below floor 1e-300")]
    NonPositiveVariance { component: usize, coordinate: usize, value: f64 },
    #[error("component {component}, coordinate {coordinate}: mean {value} is not finite")]
    NonFiniteMean { component: usize, coordinate: usize, value: f64 },
    #[error("spectrum value at coordinate {coordinate} is {value}, expected positive")]
    NonPositiveSpectrum { coordinate: usize, value: f64 },
    #[error("coordinate {coordinate} has non-finite value {value}")]
    NonFiniteCoordinate { coordinate: usize, value: f64 },
    #[error("explicit sequence has {available} values, {needed} needed")]
    SpectrumTooShort { needed: usize, available: usize },
    #[error("smoothing level {0} must be finite and nonnegative")]
    NegativeLevel(f64),
    #[error("perturbation has {found} entries for {expected} components")]
    PerturbationShape { expected: usize, found: usize },
    #[error("perturbed weight {index} is {value}, must be strictly positive")]
    PerturbedWeight { index: usize, value: f64 },
    #[error("perturbed weights sum to {sum}, expected 1 within 1e-12")]
    PerturbedWeightsNotNormalized { sum: f64 },
    #[error("component {component}, coordinate {coordinate}: perturbed variance {value} is not positive")]
    PerturbedVariance { component: usize, coordinate: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("schedule needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("step size {0} must be positive and finite")]
    BadStepSize(f64),
    #[error("half smoothing scale {0} must be positive and finite")]
    BadSmoothingScale(f64),
    #[error("time horizon {0} must be positive")]
    BadHorizon(f64),
    #[error("step {step}: non-finite drift or noise at coordinate {coordinate}")]
    NonFiniteStep { step: usize, coordinate: usize },
    #[error("chain {chain} diverged at step {step}; consider reducing dt")]
    Diverged { chain: usize, step: usize },
    #[error("vector lengths disagree: {0}")]
    Shape(String),
    #[error("need at least one chain")]
    NoChains,
    #[error("checkpoint {step} is outside 0..={last}")]
    BadCheckpoint { step: usize, last: usize },
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnnError {
    #[error("k = {k} out of range: need 1 <= k < n = {n} and k <= m = {m}")]
    KOutOfRange { k: usize, n: usize, m: usize },
    #[error("k = {k} exceeds the {available} usable neighbors")]
    KTooLarge { k: usize, available: usize },
    #[error("sample dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("excluding self requires queries and points to be the same set")]
    SelfExclusionShape,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("annealing fraction {0} outside [0, 1]")]
    KappaOutOfRange(f64),
    #[error("perturbed weight {index} is {value}; must be positive")]
    ZeroPerturbedWeight { index: usize, value: f64 },
    #[error("tilt exponent p = {p} invalid here: p*kappa - (p - 1) = {denominator} <= 0")]
    TiltUndefined { p: f64, denominator: f64 },
    #[error("component {component}, coordinate {coordinate}: variance sum {value} is not positive")]
    NonPositiveVariance { component: usize, coordinate: usize, value: f64 },
    #[error("input shapes disagree: {0}")]
    Shape(String),
    #[error("epsilon {0} must be positive")]
    BadEpsilon(f64),
    #[error("horizon {0} must be positive")]
    BadHorizon(f64),
    #[error("integration grid needs at least 2 points")]
    BadGrid,
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}
