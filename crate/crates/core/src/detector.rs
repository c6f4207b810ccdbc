//! Windowed Bayes factor drift detector.
//!
//! Each normalized count vector is treated as a fractional multinomial
//! observation. The alternative hypothesis places a Dirichlet prior `α⁰` on
//! the template probabilities and updates it with every vector in the current
//! window; the null hypothesis fixes the probabilities at `θ₀ = α⁰ / Σα⁰`.
//! The log Bayes factor over the window `W` is
//!
//! ```text
//! B0 + Σ_i [ lg(S_i + W_i) - lg(S_i) - Σ_j W_i[j] ln θ₀[j] ]
//! ```
//!
//! where `S_1 = α⁰`, `S_{i+1} = S_i + W_i`, and `lg` is the log multivariate
//! beta function.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::special::ln_gamma;
use crate::vector::{normalize, CountVector, DirichletState, ProbabilityVector};

pub const DEFAULT_WINDOW: u64 = 100;
pub const DEFAULT_GRACE: u64 = 100;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_KAPPA_PRIOR: f64 = 100.0;

/// A positive length that may also be unbounded.
///
/// Serialized as an integer, or as `"inf"` when unbounded (`null` is also
/// accepted on input).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Horizon {
    Finite(u64),
    Unbounded,
}

impl Horizon {
    pub fn finite(self) -> Option<u64> {
        match self {
            Horizon::Finite(n) => Some(n),
            Horizon::Unbounded => None,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Unbounded => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "unbounded" => Ok(Horizon::Unbounded),
            other => other.parse::<u64>().map(Horizon::Finite).map_err(|_| {
                Error::InvalidConfig(format!("expected an integer or \"inf\", got {s:?}"))
            }),
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(n) => serializer.serialize_u64(*n),
            Horizon::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
            Null(()),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(n) => Ok(Horizon::Finite(n)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Null(()) => Ok(Horizon::Unbounded),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Number of most recent vectors kept in the evidence window.
    pub window: Horizon,
    /// Each observed vector is rescaled to sum to this value.
    pub kappa_count: f64,
    /// Prior strength: the Dirichlet prior is `kappa_prior * P_N`.
    pub kappa_prior: f64,
    /// Prior weight for templates never seen in training.
    pub epsilon: f64,
    /// Significance level; the detection threshold is `ln(1 / alpha)`.
    pub alpha: f64,
    /// Steps before `grace` never raise a detection.
    pub grace: u64,
    /// Log prior odds added to every log Bayes factor.
    pub b0: f64,
    /// Report the evidence of the window *before* the current vector is
    /// appended, reproducing a one-step-lagged formulation.
    pub lag_compat: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: Horizon::Finite(DEFAULT_WINDOW),
            kappa_count: 1.0,
            kappa_prior: DEFAULT_KAPPA_PRIOR,
            epsilon: DEFAULT_EPSILON,
            alpha: DEFAULT_ALPHA,
            grace: DEFAULT_GRACE,
            b0: 0.0,
            lag_compat: false,
        }
    }
}

impl DetectorConfig {
    /// Detection threshold `c = ln(1 / alpha)`.
    pub fn threshold(&self) -> f64 {
        (1.0 / self.alpha).ln()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if let Horizon::Finite(w) = self.window {
            if w < 2 {
                return bad(format!("window must be at least 2, got {w}"));
            }
        }
        if !(self.kappa_count.is_finite() && self.kappa_count > 0.0) {
            return bad(format!(
                "kappa_count must be positive, got {}",
                self.kappa_count
            ));
        }
        if !(self.kappa_prior.is_finite() && self.kappa_prior > 0.0) {
            return bad(format!(
                "kappa_prior must be positive, got {}",
                self.kappa_prior
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !self.b0.is_finite() {
            return bad(format!("b0 must be finite, got {}", self.b0));
        }
        Ok(())
    }
}

/// Log multivariate beta function `Σ lnΓ(x_i) - lnΓ(Σ x_i)`.
pub fn lg(x: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    let mut total = 0.0;
    for (index, &value) in x.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveInput { index, value });
        }
        acc += ln_gamma(value);
        total += value;
    }
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(acc - ln_gamma(total))
}

/// Dirichlet prior `kappa * P_N`, with unseen slots floored at `kappa * epsilon`.
pub fn build_prior(
    p_n: &ProbabilityVector,
    kappa_prior: f64,
    epsilon: f64,
) -> Result<DirichletState> {
    if !(kappa_prior.is_finite() && kappa_prior > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "kappa_prior must be positive, got {kappa_prior}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    DirichletState::new(
        p_n.probs()
            .iter()
            .map(|&p| kappa_prior * if p > 0.0 { p } else { epsilon })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfEntry {
    pub t: u64,
    pub log_bf: f64,
    pub flagged: bool,
}

/// What one call to [`Detector::observe`] produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Scored(BfEntry),
    /// The vector was all zeros; time advanced but the window did not change.
    Skipped {
        t: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BfTrace {
    pub entries: Vec<BfEntry>,
    /// Steps whose input window was empty.
    pub skipped: Vec<u64>,
}

impl BfTrace {
    pub fn log_bf(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.log_bf).collect()
    }

    /// Log Bayes factor at step `t`, if that step was scored.
    pub fn at(&self, t: u64) -> Option<f64> {
        self.entries
            .binary_search_by_key(&t, |e| e.t)
            .ok()
            .map(|i| self.entries[i].log_bf)
    }
}

/// Serializable detector state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: DetectorConfig,
    pub prior: DirichletState,
    pub window: Vec<Vec<f64>>,
    pub t: u64,
    pub last_log_bf: Option<f64>,
}

/// Single-stream detector. Feed vectors in time order with [`observe`](Self::observe).
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    prior: DirichletState,
    ln_theta0: Vec<f64>,
    window: VecDeque<Vec<f64>>,
    // α⁰ plus every vector in the window.
    tail: Vec<f64>,
    // Sum of per-vector evidence terms over the window, without B0.
    evidence: f64,
    t: u64,
    last_log_bf: Option<f64>,
}

impl Detector {
    pub fn new(prior: DirichletState, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let ln_theta0 = prior.mean().probs().iter().map(|p| p.ln()).collect();
        let tail = prior.alpha().to_vec();
        Ok(Self {
            config,
            prior,
            ln_theta0,
            window: VecDeque::new(),
            tail,
            evidence: 0.0,
            t: 0,
            last_log_bf: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn prior(&self) -> &DirichletState {
        &self.prior
    }

    /// Probabilities under the null hypothesis.
    pub fn theta0(&self) -> ProbabilityVector {
        self.prior.mean()
    }

    /// Number of steps observed so far, skipped ones included.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn last_log_bf(&self) -> Option<f64> {
        self.last_log_bf
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn threshold(&self) -> f64 {
        self.config.threshold()
    }

    pub fn observe(&mut self, c: &CountVector) -> Result<Observation> {
        if c.len() != self.prior.len() {
            return Err(Error::LengthMismatch {
                expected: self.prior.len(),
                actual: c.len(),
            });
        }
        let scaled = match normalize(c, self.config.kappa_count) {
            Ok(v) => v.into_values(),
            Err(Error::AllZeroVector) => {
                self.t += 1;
                return Ok(Observation::Skipped { t: self.t });
            }
            Err(e) => return Err(e),
        };
        self.t += 1;
        let before = self.evidence;

        let full = self
            .config
            .window
            .finite()
            .is_some_and(|w| self.window.len() as u64 >= w);
        if full {
            self.window.pop_front();
            self.window.push_back(scaled);
            self.recompute();
        } else {
            self.evidence += self.increment(&self.tail, &scaled);
            for (s, x) in self.tail.iter_mut().zip(&scaled) {
                *s += x;
            }
            self.window.push_back(scaled);
        }

        let evidence = if self.config.lag_compat {
            before
        } else {
            self.evidence
        };
        let log_bf = self.config.b0 + evidence;
        self.last_log_bf = Some(log_bf);
        Ok(Observation::Scored(BfEntry {
            t: self.t,
            log_bf,
            flagged: log_bf > self.config.threshold() && self.t >= self.config.grace,
        }))
    }

    fn recompute(&mut self) {
        let mut tail = self.prior.alpha().to_vec();
        let mut evidence = 0.0;
        for x in &self.window {
            evidence += self.increment(&tail, x);
            for (s, v) in tail.iter_mut().zip(x) {
                *s += v;
            }
        }
        self.tail = tail;
        self.evidence = evidence;
    }

    // lg(s + x) - lg(s) - Σ x_j ln θ₀[j]. Slots with x_j = 0 cancel exactly
    // and are skipped.
    fn increment(&self, s: &[f64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut s_total = 0.0;
        let mut x_total = 0.0;
        for ((&sj, &xj), &ln_theta) in s.iter().zip(x).zip(&self.ln_theta0) {
            s_total += sj;
            x_total += xj;
            if xj != 0.0 {
                acc += ln_gamma(sj + xj) - ln_gamma(sj) - xj * ln_theta;
            }
        }
        acc - (ln_gamma(s_total + x_total) - ln_gamma(s_total))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            prior: self.prior.clone(),
            window: self.window.iter().cloned().collect(),
            t: self.t,
            last_log_bf: self.last_log_bf,
        }
    }

    pub fn restore(cp: Checkpoint) -> Result<Self> {
        let mut d = Detector::new(cp.prior, cp.config)?;
        if let Some(w) = d.config.window.finite() {
            if cp.window.len() as u64 > w {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint holds {} vectors but the window is {w}",
                    cp.window.len()
                )));
            }
        }
        for v in &cp.window {
            if v.len() != d.prior.len() {
                return Err(Error::LengthMismatch {
                    expected: d.prior.len(),
                    actual: v.len(),
                });
            }
            CountVector::new(v.clone(), 0)?;
        }
        d.window = cp.window.into();
        d.recompute();
        d.t = cp.t;
        d.last_log_bf = cp.last_log_bf;
        Ok(d)
    }
}

/// Runs a fresh detector over a batch of vectors.
pub fn run(prior: &DirichletState, cs: &[CountVector], config: &DetectorConfig) -> Result<BfTrace> {
    let mut detector = Detector::new(prior.clone(), config.clone())?;
    let mut trace = BfTrace::default();
    for c in cs {
        match detector.observe(c)? {
            Observation::Scored(e) => trace.entries.push(e),
            Observation::Skipped { t } => trace.skipped.push(t),
        }
    }
    Ok(trace)
}

/// First step at or after the grace period whose log Bayes factor exceeds
/// the threshold, or 0.
pub fn first_detection(trace: &BfTrace, config: &DetectorConfig) -> u64 {
    let c = config.threshold();
    trace
        .entries
        .iter()
        .find(|e| e.t >= config.grace && e.log_bf > c)
        .map_or(0, |e| e.t)
}
