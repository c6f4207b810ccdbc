//! Python bindings: `import pylogdrift`.

use logdrift::detector::{self, DetectorConfig, Horizon};
use logdrift::simulator::{self, pool_seed, ScenarioConfig, SyntheticPools};
use logdrift::templater::{self, Matcher, Preprocessor};
use logdrift::{CountVector, Observation, ProbabilityVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vectors(rows: Vec<Vec<f64>>) -> PyResult<Vec<CountVector>> {
    rows.into_iter()
        .enumerate()
        .map(|(t, r)| CountVector::new(r, t as u64).map_err(err))
        .collect()
}

fn horizon(window: Option<u64>) -> Horizon {
    window.map_or(Horizon::Unbounded, Horizon::Finite)
}

/// lg(x) = sum(lnΓ(x_i)) - lnΓ(sum(x_i)) for strictly positive x.
#[pyfunction]
fn lg(x: Vec<f64>) -> PyResult<f64> {
    detector::lg(&x).map_err(err)
}

/// Rescales a count vector to total `kappa`.
#[pyfunction]
#[pyo3(signature = (counts, kappa=1.0))]
fn normalize(counts: Vec<f64>, kappa: f64) -> PyResult<Vec<f64>> {
    let c = CountVector::new(counts, 0).map_err(err)?;
    logdrift::normalize(&c, kappa)
        .map(|v| v.into_values())
        .map_err(err)
}

/// Pooled maximum-likelihood probabilities of a sample of count vectors.
#[pyfunction]
fn mle(sample: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let p = logdrift::mle(&vectors(sample)?).map_err(err)?;
    Ok(p.probs().to_vec())
}

#[pyfunction]
fn chi_squared_sf(x: f64, df: u64) -> f64 {
    logdrift::chi_squared_sf(x, df)
}

/// Chi-squared homogeneity test; returns `{"statistic", "df", "p_value"}`.
#[pyfunction]
fn chi_squared_fit<'py>(py: Python<'py>, sample: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = logdrift::chi_squared_fit(&vectors(sample)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("statistic", r.statistic)?;
    d.set_item("df", r.df)?;
    d.set_item("p_value", r.p_value)?;
    Ok(d)
}

/// Dirichlet prior `kappa_prior * p`, with zero probabilities replaced by `epsilon`.
#[pyfunction]
#[pyo3(signature = (probs, kappa_prior=detector::DEFAULT_KAPPA_PRIOR, epsilon=detector::DEFAULT_EPSILON))]
fn build_prior(probs: Vec<f64>, kappa_prior: f64, epsilon: f64) -> PyResult<Vec<f64>> {
    let p = ProbabilityVector::new(probs).map_err(err)?;
    let a = detector::build_prior(&p, kappa_prior, epsilon).map_err(err)?;
    Ok(a.alpha().to_vec())
}

/// Detection metrics `{"tpr", "fpr", "fnr", "add"}`; `add` is None without
/// true positives.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    detections: Vec<u64>,
    t_s: u64,
    grace: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = logdrift::evaluate(&detections, t_s, grace).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tpr", m.tpr)?;
    d.set_item("fpr", m.fpr)?;
    d.set_item("fnr", m.fnr)?;
    d.set_item("add", m.add)?;
    Ok(d)
}

/// Template set with its matcher.
#[pyclass(module = "pylogdrift")]
struct TemplateSet {
    inner: logdrift::TemplateSet,
    matcher: Matcher,
    preprocessor: Preprocessor,
}

impl TemplateSet {
    fn wrap(inner: logdrift::TemplateSet) -> Self {
        Self {
            matcher: Matcher::new(&inner),
            inner,
            preprocessor: Preprocessor::default(),
        }
    }
}

#[pymethods]
impl TemplateSet {
    /// Mines templates from raw messages (cleaned with the default preprocessor).
    #[staticmethod]
    #[pyo3(signature = (lines, threshold=templater::DEFAULT_SIMILARITY_THRESHOLD))]
    fn mine(lines: Vec<String>, threshold: f64) -> PyResult<Self> {
        let pre = Preprocessor::default();
        let cleaned: Vec<String> = lines.iter().filter_map(|l| pre.preprocess(l)).collect();
        templater::mine_templates(&cleaned, threshold)
            .map(Self::wrap)
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self::wrap).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[getter]
    fn patterns(&self) -> Vec<String> {
        self.inner
            .templates()
            .iter()
            .map(|t| t.pattern.clone())
            .collect()
    }

    /// Number of templates K.
    fn __len__(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn vector_len(&self) -> usize {
        self.inner.vector_len()
    }

    /// 1-based slot of a raw message: a template id, K+1 (unknown error) or
    /// K+2 (unknown normal). None when preprocessing drops the line.
    fn match_line(&self, line: &str) -> Option<usize> {
        let cleaned = self.preprocessor.preprocess(line)?;
        Some(self.matcher.match_line(&cleaned).index(self.inner.size()))
    }
}

/// Windowed Bayes factor detector.
#[pyclass(module = "pylogdrift")]
struct Detector {
    inner: logdrift::Detector,
}

#[pymethods]
impl Detector {
    /// `window=None` uses the whole history.
    #[new]
    #[pyo3(signature = (
        prior,
        window=Some(detector::DEFAULT_WINDOW),
        kappa_count=1.0,
        alpha=detector::DEFAULT_ALPHA,
        grace=detector::DEFAULT_GRACE,
        b0=0.0,
        lag_compat=false,
    ))]
    fn new(
        prior: Vec<f64>,
        window: Option<u64>,
        kappa_count: f64,
        alpha: f64,
        grace: u64,
        b0: f64,
        lag_compat: bool,
    ) -> PyResult<Self> {
        let prior = logdrift::DirichletState::new(prior).map_err(err)?;
        let config = DetectorConfig {
            window: horizon(window),
            kappa_count,
            alpha,
            grace,
            b0,
            lag_compat,
            ..DetectorConfig::default()
        };
        config.validate().map_err(err)?;
        logdrift::Detector::new(prior, config)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// Feeds one count vector; returns `{"t", "log_bf", "flagged"}` or
    /// `{"t", "skipped": True}` for an all-zero vector.
    fn observe<'py>(&mut self, py: Python<'py>, counts: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let c = CountVector::new(counts, 0).map_err(err)?;
        let d = PyDict::new(py);
        match self.inner.observe(&c).map_err(err)? {
            Observation::Scored(e) => {
                d.set_item("t", e.t)?;
                d.set_item("log_bf", e.log_bf)?;
                d.set_item("flagged", e.flagged)?;
            }
            Observation::Skipped { t } => {
                d.set_item("t", t)?;
                d.set_item("skipped", true)?;
            }
        }
        Ok(d)
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    #[getter]
    fn t(&self) -> u64 {
        self.inner.t()
    }

    fn checkpoint(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.checkpoint()).map_err(err)
    }

    #[staticmethod]
    fn restore(text: &str) -> PyResult<Self> {
        let cp: logdrift::Checkpoint = serde_json::from_str(text).map_err(err)?;
        logdrift::Detector::restore(cp)
            .map(|inner| Self { inner })
            .map_err(err)
    }
}

/// Runs a scenario (JSON, same schema as the CLI) and returns the detection
/// window of every repetition. Without pools, synthetic pools are generated
/// exactly as `logdrift simulate --synthetic` does.
#[pyfunction]
#[pyo3(signature = (scenario, pool_n=None, pool_a=None))]
fn simulate(
    py: Python<'_>,
    scenario: &str,
    pool_n: Option<Vec<Vec<f64>>>,
    pool_a: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<u64>> {
    let cfg: ScenarioConfig = serde_json::from_str(scenario).map_err(err)?;
    let (normal, anomalous) = match (pool_n, pool_a) {
        (Some(n), Some(a)) => (vectors(n)?, vectors(a)?),
        (None, None) => {
            let g = SyntheticPools::default()
                .generate(pool_seed(cfg.seed))
                .map_err(err)?;
            (g.normal, g.anomalous)
        }
        _ => {
            return Err(PyValueError::new_err(
                "give both pool_n and pool_a, or neither",
            ))
        }
    };
    let reps = py
        .detach(|| simulator::run_scenario(&cfg, &normal, &anomalous))
        .map_err(err)?;
    Ok(reps.iter().map(|r| r.d).collect())
}

#[pymodule]
fn pylogdrift(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(lg, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(mle, m)?)?;
    m.add_function(wrap_pyfunction!(chi_squared_sf, m)?)?;
    m.add_function(wrap_pyfunction!(chi_squared_fit, m)?)?;
    m.add_function(wrap_pyfunction!(build_prior, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<TemplateSet>()?;
    m.add_class::<Detector>()?;
    Ok(())
}
