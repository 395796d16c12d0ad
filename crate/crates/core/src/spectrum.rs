//! Lazily evaluated spectra of diagonal operators.
//!
//! Every diagonal operator in the sampler (mixture covariances, the smoothing
//! operator, the preconditioner, perturbation sequences) is described by a
//! coordinate rule `j -> value` for 1-based coordinate indices `j`.

use serde::{Deserialize, Serialize};

use crate::error::MixtureError;

/// Eigenvalue sequence of a diagonal operator, indexed from `j = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSpec {
    /// `scale * j^(-exponent)`.
    PowerLaw { scale: f64, exponent: f64 },
    /// The same value on every coordinate.
    Constant { value: f64 },
    /// A finite list of values; coordinates past the end are undefined.
    Explicit { values: Vec<f64> },
}

impl SpectrumSpec {
    pub fn power_law(scale: f64, exponent: f64) -> Self {
        SpectrumSpec::PowerLaw { scale, exponent }
    }

    pub fn constant(value: f64) -> Self {
        SpectrumSpec::Constant { value }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        SpectrumSpec::Explicit { values }
    }

    /// Value at the 1-based coordinate `j`, or `None` when `j` is out of range.
    pub fn eigenvalue(&self, j: usize) -> Option<f64> {
        if j == 0 {
            return None;
        }
        match self {
            SpectrumSpec::PowerLaw { scale, exponent } => Some(scale * (j as f64).powf(-exponent)),
            SpectrumSpec::Constant { value } => Some(*value),
            SpectrumSpec::Explicit { values } => values.get(j - 1).copied(),
        }
    }

    /// The first `d` values, checked to be finite and strictly positive.
    pub fn eigenvalues(&self, d: usize) -> Result<Vec<f64>, MixtureError> {
        (1..=d)
            .map(|j| match self.eigenvalue(j) {
                Some(v) if v.is_finite() && v > 0.0 => Ok(v),
                Some(v) => Err(MixtureError::NonPositiveSpectrum { coordinate: j, value: v }),
                None => Err(MixtureError::SpectrumTooShort { needed: d, available: j - 1 }),
            })
            .collect()
    }

    /// The first `d` values without the positivity check (signed sequences).
    pub fn values(&self, d: usize) -> Result<Vec<f64>, MixtureError> {
        (1..=d)
            .map(|j| {
                self.eigenvalue(j)
                    .ok_or(MixtureError::SpectrumTooShort { needed: d, available: j - 1 })
            })
            .collect()
    }

    /// Trace-class diagnostic: whether the infinite sequence has a finite sum.
    pub fn summable(&self) -> bool {
        match self {
            SpectrumSpec::PowerLaw { scale, exponent } => *scale == 0.0 || *exponent > 1.0,
            SpectrumSpec::Constant { value } => *value == 0.0,
            SpectrumSpec::Explicit { values } => values.iter().sum::<f64>().is_finite(),
        }
    }

    /// Same spectrum with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            SpectrumSpec::PowerLaw { scale, exponent } => {
                SpectrumSpec::PowerLaw { scale: scale * factor, exponent: *exponent }
            }
            SpectrumSpec::Constant { value } => SpectrumSpec::Constant { value: value * factor },
            SpectrumSpec::Explicit { values } => {
                SpectrumSpec::Explicit { values: values.iter().map(|v| v * factor).collect() }
            }
        }
    }
}

/// Per-coordinate rule for signed sequences such as means and perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordinateRule {
    /// Zero on every coordinate.
    Zero,
    /// Nonzero only at the listed 1-based coordinates.
    Sparse { entries: Vec<(usize, f64)> },
    /// Dense explicit values; coordinates past the end are undefined.
    Explicit { values: Vec<f64> },
    /// `sign * spectrum(j)`.
    Spectrum { spectrum: SpectrumSpec, sign: f64 },
}

impl Default for CoordinateRule {
    fn default() -> Self {
        CoordinateRule::Zero
    }
}

impl CoordinateRule {
    pub fn sparse(entries: Vec<(usize, f64)>) -> Self {
        CoordinateRule::Sparse { entries }
    }

    pub fn spectrum(spectrum: SpectrumSpec) -> Self {
        CoordinateRule::Spectrum { spectrum, sign: 1.0 }
    }

    pub fn value(&self, j: usize) -> Option<f64> {
        if j == 0 {
            return None;
        }
        match self {
            CoordinateRule::Zero => Some(0.0),
            CoordinateRule::Sparse { entries } => {
                Some(entries.iter().filter(|(k, _)| *k == j).map(|(_, v)| v).sum())
            }
            CoordinateRule::Explicit { values } => values.get(j - 1).copied(),
            CoordinateRule::Spectrum { spectrum, sign } => spectrum.eigenvalue(j).map(|v| sign * v),
        }
    }

    pub fn values(&self, d: usize) -> Result<Vec<f64>, MixtureError> {
        (1..=d)
            .map(|j| match self.value(j) {
                Some(v) if v.is_finite() => Ok(v),
                Some(v) => Err(MixtureError::NonFiniteCoordinate { coordinate: j, value: v }),
                None => Err(MixtureError::SpectrumTooShort { needed: d, available: j - 1 }),
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoordinateRule::Zero => true,
            CoordinateRule::Sparse { entries } => entries.iter().all(|(_, v)| *v == 0.0),
            CoordinateRule::Explicit { values } => values.iter().all(|v| *v == 0.0),
            CoordinateRule::Spectrum { spectrum, sign } => {
                *sign == 0.0
                    || match spectrum {
                        SpectrumSpec::PowerLaw { scale, .. } => *scale == 0.0,
                        SpectrumSpec::Constant { value } => *value == 0.0,
                        SpectrumSpec::Explicit { values } => values.iter().all(|v| *v == 0.0),
                    }
            }
        }
    }
}
