//! Dense vector types shared by every stage of the pipeline.
//!
//! Storage order is fixed: template slots in template id order, followed by
//! the two unknown slots (`unk_error`, then `unk_normal`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a probability vector sums to one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Per-template frequencies for one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct CountVector {
    values: Vec<f64>,
    window_index: u64,
}

impl CountVector {
    pub fn new(values: Vec<f64>, window_index: u64) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidCount { index, value });
            }
        }
        Ok(Self {
            values,
            window_index,
        })
    }

    /// An all-zero vector of the given length.
    pub fn zeros(len: usize, window_index: u64) -> Self {
        Self {
            values: vec![0.0; len],
            window_index,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window_index(&self) -> u64 {
        self.window_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Element sum (the number of lines for a raw count vector).
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// True when every element is a whole number.
    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    pub(crate) fn increment(&mut self, slot: usize) {
        self.values[slot] += 1.0;
    }

    /// Rescales the vector so that it sums to `kappa`.
    pub fn normalize(&self, kappa: f64) -> Result<CountVector> {
        normalize(self, kappa)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Returns `kappa * c / sum(c)`.
///
/// Fails with [`Error::AllZeroVector`] when the window is empty.
pub fn normalize(c: &CountVector, kappa: f64) -> Result<CountVector> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "kappa_count must be positive, got {kappa}"
        )));
    }
    let total = c.total();
    if total <= 0.0 {
        return Err(Error::AllZeroVector);
    }
    let values = c.values.iter().map(|v| kappa * (v / total)).collect();
    Ok(CountVector {
        values,
        window_index: c.window_index,
    })
}

/// Elementwise average of a sample of normalized vectors.
pub fn elementwise_mean(cs: &[CountVector]) -> Result<ProbabilityVector> {
    let first = cs.first().ok_or(Error::EmptySample)?;
    let len = first.len();
    let mut acc = vec![0.0; len];
    for c in cs {
        if c.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: c.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    let n = cs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    ProbabilityVector::new(acc)
}

/// A categorical distribution over count vector slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProbabilityVector")]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawProbabilityVector {
    probs: Vec<f64>,
}

impl TryFrom<RawProbabilityVector> for ProbabilityVector {
    type Error = Error;

    fn try_from(raw: RawProbabilityVector) -> Result<Self> {
        ProbabilityVector::new(raw.probs)
    }
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptySample);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidCount { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Strictly positive Dirichlet concentration vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDirichletState")]
pub struct DirichletState {
    alpha: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDirichletState {
    alpha: Vec<f64>,
}

impl TryFrom<RawDirichletState> for DirichletState {
    type Error = Error;

    fn try_from(raw: RawDirichletState) -> Result<Self> {
        DirichletState::new(raw.alpha)
    }
}

impl DirichletState {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptySample);
        }
        for (index, &value) in alpha.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveInput { index, value });
            }
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// The prior mean `alpha / sum(alpha)`.
    pub fn mean(&self) -> ProbabilityVector {
        let total: f64 = self.alpha.iter().sum();
        ProbabilityVector {
            probs: self.alpha.iter().map(|a| a / total).collect(),
        }
    }
}
