//! From raw log lines to templates (training) and per-window count vectors
//! (inference).

mod matcher;
mod miner;
mod preprocess;

pub use matcher::{match_template, Matcher, Slot};
pub use miner::{
    mine_templates, mine_templates_with_counts, MiningOutcome, DEFAULT_SIMILARITY_THRESHOLD,
};
pub use preprocess::{preprocess, Preprocessor, DEFAULT_TIMESTAMP_MASKS, TIMESTAMP_TOKEN};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::templates::TemplateSet;
use crate::vector::CountVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: i64,
    pub message: String,
}

impl LogRecord {
    pub fn new(timestamp_ms: i64, message: impl Into<String>) -> Self {
        Self {
            timestamp_ms,
            message: message.into(),
        }
    }
}

/// Width of the aggregation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    width_ms: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { width_ms: 10_000 }
    }
}

impl WindowSpec {
    pub fn from_secs(width: f64) -> Result<Self> {
        let width_ms = (width * 1000.0).round();
        if !(width.is_finite() && width_ms >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "window width must be positive, got {width} s"
            )));
        }
        Ok(Self {
            width_ms: width_ms as i64,
        })
    }

    pub fn width_ms(&self) -> i64 {
        self.width_ms
    }
}

/// Streaming aggregation of log records into count vectors.
///
/// Intervals are half-open, `width` long, and anchored at the first record.
/// Intervals without any surviving line produce no vector.
#[derive(Debug)]
pub struct WindowCounter<'a> {
    matcher: &'a Matcher,
    preprocessor: &'a Preprocessor,
    spec: WindowSpec,
    anchor: Option<i64>,
    last_ts: Option<i64>,
    current: Option<CountVector>,
}

impl<'a> WindowCounter<'a> {
    pub fn new(matcher: &'a Matcher, preprocessor: &'a Preprocessor, spec: WindowSpec) -> Self {
        Self {
            matcher,
            preprocessor,
            spec,
            anchor: None,
            last_ts: None,
            current: None,
        }
    }

    /// Adds a record; returns the previous window once a record lands past it.
    pub fn push(&mut self, record: &LogRecord) -> Result<Option<CountVector>> {
        if let Some(previous) = self.last_ts {
            if record.timestamp_ms < previous {
                return Err(Error::UnsortedInput {
                    previous,
                    current: record.timestamp_ms,
                });
            }
        }
        self.last_ts = Some(record.timestamp_ms);
        let anchor = *self.anchor.get_or_insert(record.timestamp_ms);

        let Some(message) = self.preprocessor.preprocess(&record.message) else {
            return Ok(None);
        };
        let index = ((record.timestamp_ms - anchor) / self.spec.width_ms) as u64;
        let k = self.matcher.k();

        let mut emitted = None;
        if self
            .current
            .as_ref()
            .is_some_and(|c| c.window_index() != index)
        {
            emitted = self.current.take();
        }
        let current = self
            .current
            .get_or_insert_with(|| CountVector::zeros(k + 2, index));
        current.increment(self.matcher.match_line(&message).offset(k));
        Ok(emitted)
    }

    /// Flushes the last open window.
    pub fn finish(self) -> Option<CountVector> {
        self.current
    }
}

/// Collects all windows of a sorted record stream.
pub fn window_counts<I>(
    records: I,
    ts: &TemplateSet,
    preprocessor: &Preprocessor,
    spec: WindowSpec,
) -> Result<Vec<CountVector>>
where
    I: IntoIterator<Item = LogRecord>,
{
    let matcher = Matcher::new(ts);
    let mut counter = WindowCounter::new(&matcher, preprocessor, spec);
    let mut out = Vec::new();
    for record in records {
        if let Some(v) = counter.push(&record)? {
            out.push(v);
        }
    }
    out.extend(counter.finish());
    Ok(out)
}

/// Training windows must contain no unmatched lines.
pub fn check_training(vectors: &[CountVector], k: usize) -> Result<()> {
    for v in vectors {
        let unknown: f64 = v.values()[k..].iter().sum();
        if unknown > 0.0 {
            return Err(Error::UnknownInTraining {
                window_index: v.window_index(),
                count: unknown,
            });
        }
    }
    Ok(())
}
