//! Contamination-based drift simulation and detection-quality metrics.
//!
//! Every repetition `r` draws from its own `ChaCha8Rng` seeded with
//! `seed ^ r`, so detection lists are reproducible across platforms and
//! independent of how repetitions are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    build_prior, first_detection, BfTrace, Detector, DetectorConfig, Horizon, Observation,
};
use crate::error::{Error, Result};
use crate::multinomial::mle;
use crate::vector::{CountVector, DirichletState, ProbabilityVector};

/// The generator behind every simulated stream.
pub type SimRng = ChaCha8Rng;

/// Seed for synthetic pools generated alongside a scenario, kept apart from
/// the repetition streams `seed ^ r`.
pub fn pool_seed(scenario_seed: u64) -> u64 {
    scenario_seed.wrapping_add(0x9E37_79B9_7F4A_7C15)
}

pub fn repetition_rng(seed: u64, r: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed ^ r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Total number of windows per run.
    #[serde(rename = "T")]
    pub total_windows: u64,
    /// First contaminated window (1-based).
    pub t_s: u64,
    /// Contamination level.
    pub p: f64,
    /// Contamination length.
    pub ell: Horizon,
    #[serde(rename = "R")]
    pub repetitions: u64,
    pub seed: u64,
    pub detector: DetectorConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            total_windows: 1000,
            t_s: 501,
            p: 0.1,
            ell: Horizon::Unbounded,
            repetitions: 50,
            seed: 0,
            detector: DetectorConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.t_s > 1 && self.t_s <= self.total_windows) {
            return bad(format!(
                "t_s must satisfy 1 < t_s <= T, got t_s = {} and T = {}",
                self.t_s, self.total_windows
            ));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.ell == Horizon::Finite(0) {
            return bad("ell must be positive".into());
        }
        if self.repetitions == 0 {
            return bad("R must be positive".into());
        }
        self.detector.validate()
    }
}

/// Contamination level at window `t`.
pub fn contamination_profile(t: u64, cfg: &ScenarioConfig) -> f64 {
    if t < cfg.t_s {
        return 0.0;
    }
    match cfg.ell {
        Horizon::Unbounded => cfg.p,
        Horizon::Finite(ell) if t < cfg.t_s + ell => cfg.p,
        Horizon::Finite(_) => 0.0,
    }
}

fn proportions(c: &CountVector) -> Result<Vec<f64>> {
    let total = c.total();
    if total <= 0.0 {
        return Err(Error::AllZeroVector);
    }
    Ok(c.values().iter().map(|v| v / total).collect())
}

/// One simulated window: `p * E(C_A) + (1 - p) * E(C_N)` with `C_N`, `C_A`
/// drawn uniformly from their pools. Both draws always happen, so the random
/// stream does not depend on `p`.
pub fn sim_drift<R: Rng + ?Sized>(
    c_n_pool: &[CountVector],
    c_a_pool: &[CountVector],
    p: f64,
    rng: &mut R,
) -> Result<CountVector> {
    if c_n_pool.is_empty() {
        return Err(Error::EmptyPool("normal"));
    }
    if c_a_pool.is_empty() {
        return Err(Error::EmptyPool("anomalous"));
    }
    let normal = &c_n_pool[rng.random_range(0..c_n_pool.len())];
    let anomalous = &c_a_pool[rng.random_range(0..c_a_pool.len())];
    if normal.len() != anomalous.len() {
        return Err(Error::LengthMismatch {
            expected: normal.len(),
            actual: anomalous.len(),
        });
    }
    let en = proportions(normal)?;
    let ea = proportions(anomalous)?;
    let mixed = en
        .iter()
        .zip(&ea)
        .map(|(n, a)| p * a + (1.0 - p) * n)
        .collect();
    CountVector::new(mixed, 0)
}

/// Detection outcome of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub r: u64,
    /// First detection window, 0 if none.
    pub d: u64,
    pub trace: BfTrace,
}

/// Runs repetition `r` of a scenario from the given prior.
pub fn run_repetition(
    cfg: &ScenarioConfig,
    prior: &DirichletState,
    c_n_pool: &[CountVector],
    c_a_pool: &[CountVector],
    r: u64,
) -> Result<Repetition> {
    let mut rng = repetition_rng(cfg.seed, r);
    let mut detector = Detector::new(prior.clone(), cfg.detector.clone())?;
    let mut trace = BfTrace::default();
    for t in 1..=cfg.total_windows {
        let p_t = contamination_profile(t, cfg);
        let c = sim_drift(c_n_pool, c_a_pool, p_t, &mut rng)?;
        match detector.observe(&c)? {
            Observation::Scored(e) => trace.entries.push(e),
            Observation::Skipped { t } => trace.skipped.push(t),
        }
    }
    let d = first_detection(&trace, &cfg.detector);
    Ok(Repetition { r, d, trace })
}

/// Baseline prior built from the normal pool's pooled MLE.
pub fn scenario_prior(cfg: &ScenarioConfig, c_n_pool: &[CountVector]) -> Result<DirichletState> {
    if c_n_pool.is_empty() {
        return Err(Error::EmptyPool("normal"));
    }
    build_prior(
        &mle(c_n_pool)?,
        cfg.detector.kappa_prior,
        cfg.detector.epsilon,
    )
}

/// Runs all `R` repetitions in parallel; results are ordered by `r`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    c_n_pool: &[CountVector],
    c_a_pool: &[CountVector],
) -> Result<Vec<Repetition>> {
    cfg.validate()?;
    if c_a_pool.is_empty() {
        return Err(Error::EmptyPool("anomalous"));
    }
    let prior = scenario_prior(cfg, c_n_pool)?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(cfg, &prior, c_n_pool, c_a_pool, r))
        .collect()
}

/// Sequential variant of [`run_scenario`].
pub fn run_scenario_sequential(
    cfg: &ScenarioConfig,
    c_n_pool: &[CountVector],
    c_a_pool: &[CountVector],
) -> Result<Vec<Repetition>> {
    cfg.validate()?;
    if c_a_pool.is_empty() {
        return Err(Error::EmptyPool("anomalous"));
    }
    let prior = scenario_prior(cfg, c_n_pool)?;
    (0..cfg.repetitions)
        .map(|r| run_repetition(cfg, &prior, c_n_pool, c_a_pool, r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
    /// Average detection delay over true positives; `None` without any.
    pub add: Option<f64>,
}

/// Detection-quality summary over repetitions.
///
/// A run is a false positive when `g <= d < t_s`, a true positive when
/// `d >= t_s`, and a false negative when `d = 0`.
pub fn evaluate(detections: &[u64], t_s: u64, g: u64) -> Result<RunMetrics> {
    if detections.is_empty() {
        return Err(Error::EmptySample);
    }
    let (mut tp, mut fp, mut fnn) = (0u64, 0u64, 0u64);
    let mut delay = 0u64;
    for &d in detections {
        if d == 0 {
            fnn += 1;
        } else if d < g {
            return Err(Error::InvalidDetection {
                detection: d,
                grace: g,
            });
        } else if d < t_s {
            fp += 1;
        } else {
            tp += 1;
            delay += d - t_s;
        }
    }
    let r = detections.len() as f64;
    Ok(RunMetrics {
        tpr: tp as f64 / r,
        fpr: fp as f64 / r,
        fnr: fnn as f64 / r,
        add: (tp > 0).then(|| delay as f64 / tp as f64),
    })
}

/// Draws `n` categorical samples and returns the per-slot counts.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let total = acc;
    let mut counts = vec![0.0; probs.len()];
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        let mut slot = cumulative.partition_point(|&c| c <= u);
        if slot >= probs.len() {
            slot = probs.len() - 1;
        }
        // never land on a zero-probability slot
        while probs[slot] == 0.0 && slot > 0 {
            slot -= 1;
        }
        counts[slot] += 1.0;
    }
    counts
}

fn flat_dirichlet<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Generator for normal/anomalous pools when no recorded data is available.
///
/// The normal distribution `P_N` covers template slots `0..normal_support`.
/// The anomalous distribution `P_A` covers the last `overlap` of those slots,
/// every remaining template slot, and both unknown slots. With `overlap = 0`
/// the two supports are disjoint. Weights within each support are drawn from
/// a flat Dirichlet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticPools {
    /// Number of templates `K`; vectors have `K + 2` slots.
    pub templates: usize,
    pub normal_support: usize,
    pub overlap: usize,
    /// Lines per simulated window.
    pub draws: u64,
    /// Vectors per pool.
    pub pool_size: usize,
}

impl Default for SyntheticPools {
    fn default() -> Self {
        Self {
            templates: 10,
            normal_support: 8,
            overlap: 0,
            draws: 200,
            pool_size: 200,
        }
    }
}

/// Output of [`SyntheticPools::generate`].
#[derive(Debug, Clone)]
pub struct GeneratedPools {
    pub p_n: ProbabilityVector,
    pub p_a: ProbabilityVector,
    pub normal: Vec<CountVector>,
    pub anomalous: Vec<CountVector>,
}

impl SyntheticPools {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.normal_support == 0 || self.normal_support > self.templates {
            return bad(format!(
                "normal_support must lie in 1..={}, got {}",
                self.templates, self.normal_support
            ));
        }
        if self.overlap > self.normal_support {
            return bad(format!(
                "overlap {} exceeds normal_support {}",
                self.overlap, self.normal_support
            ));
        }
        if self.draws == 0 || self.pool_size == 0 {
            return bad("draws and pool_size must be positive".into());
        }
        Ok(())
    }

    pub fn vector_len(&self) -> usize {
        self.templates + 2
    }

    /// Distributions `(P_N, P_A)`.
    pub fn distributions<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(ProbabilityVector, ProbabilityVector)> {
        self.validate()?;
        let len = self.vector_len();
        let mut p_n = vec![0.0; len];
        for (slot, w) in flat_dirichlet(self.normal_support, rng)
            .into_iter()
            .enumerate()
        {
            p_n[slot] = w;
        }
        let a_start = self.normal_support - self.overlap;
        let mut p_a = vec![0.0; len];
        for (slot, w) in flat_dirichlet(len - a_start, rng).into_iter().enumerate() {
            p_a[a_start + slot] = w;
        }
        Ok((ProbabilityVector::new(p_n)?, ProbabilityVector::new(p_a)?))
    }

    pub fn generate(&self, seed: u64) -> Result<GeneratedPools> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p_n, p_a) = self.distributions(&mut rng)?;
        let mut draw_pool = |p: &ProbabilityVector| -> Result<Vec<CountVector>> {
            (0..self.pool_size)
                .map(|i| {
                    CountVector::new(
                        sample_multinomial(p.probs(), self.draws, &mut rng),
                        i as u64,
                    )
                })
                .collect()
        };
        let normal = draw_pool(&p_n)?;
        let anomalous = draw_pool(&p_a)?;
        Ok(GeneratedPools {
            p_n,
            p_a,
            normal,
            anomalous,
        })
    }
}
