//! Drift monitoring for log anomaly detection pipelines.
//!
//! Raw logs are reduced to per-window template count vectors
//! ([`templater`]), checked for multinomial fit ([`multinomial`]), and
//! monitored with a windowed Dirichlet-multinomial Bayes factor
//! ([`detector`]). [`simulator`] injects contamination into recorded or
//! synthetic pools and scores detection quality.

pub mod detector;
pub mod error;
pub mod io;
pub mod multinomial;
pub mod simulator;
pub mod special;
pub mod templater;
pub mod templates;
pub mod vector;

pub use detector::{
    build_prior, first_detection, lg, run, BfEntry, BfTrace, Checkpoint, Detector, DetectorConfig,
    Horizon, Observation,
};
pub use error::{Error, Result};
pub use multinomial::{
    chi_squared_fit, chi_squared_sf, mle, sd_diagnostic, FitReport, SdDiagnostic,
};
pub use simulator::{
    contamination_profile, evaluate, run_scenario, sim_drift, RunMetrics, ScenarioConfig,
    SyntheticPools,
};
pub use templater::{
    match_template, mine_templates, preprocess, window_counts, LogRecord, Matcher, Preprocessor,
    Slot, WindowSpec,
};
pub use templates::{Template, TemplateSet};
pub use vector::{elementwise_mean, normalize, CountVector, DirichletState, ProbabilityVector};
