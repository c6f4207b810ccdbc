use regex::Regex;

use crate::error::Result;

/// Token substituted for timestamps found inside a message.
pub const TIMESTAMP_TOKEN: &str = "<TS>";

/// Default masks, applied in order: ISO-8601, 10/13-digit epoch, `HH:MM:SS`.
pub const DEFAULT_TIMESTAMP_MASKS: &[&str] = &[
    r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?",
    r"\b(?:\d{13}|\d{10})\b",
    r"\b\d{2}:\d{2}:\d{2}(?:[.,]\d+)?\b",
];

/// Cleans raw messages before template mining or matching.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    prefix_rules: Vec<Regex>,
    timestamp_masks: Vec<Regex>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            prefix_rules: Vec::new(),
            timestamp_masks: DEFAULT_TIMESTAMP_MASKS
                .iter()
                .map(|p| Regex::new(p).expect("default mask compiles"))
                .collect(),
        }
    }
}

impl Preprocessor {
    pub fn new<P, M>(prefix_rules: P, timestamp_masks: M) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        M: IntoIterator,
        M::Item: AsRef<str>,
    {
        Ok(Self {
            prefix_rules: compile(prefix_rules)?,
            timestamp_masks: compile(timestamp_masks)?,
        })
    }

    /// Default timestamp masks plus the given prefix rules.
    pub fn with_prefix_rules<P>(prefix_rules: P) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
    {
        Ok(Self {
            prefix_rules: compile(prefix_rules)?,
            ..Self::default()
        })
    }

    /// Returns the cleaned message, or `None` when the record should be dropped.
    pub fn preprocess(&self, raw: &str) -> Option<String> {
        let mut msg = raw.trim_start().to_string();
        for rule in &self.prefix_rules {
            if let Some(m) = rule.find(&msg) {
                if m.start() == 0 {
                    msg = msg[m.end()..].trim_start().to_string();
                }
            }
        }
        for mask in &self.timestamp_masks {
            if mask.is_match(&msg) {
                msg = mask.replace_all(&msg, TIMESTAMP_TOKEN).into_owned();
            }
        }
        let msg = msg.trim();
        if msg.is_empty() {
            None
        } else {
            Some(msg.to_string())
        }
    }
}

fn compile<I>(patterns: I) -> Result<Vec<Regex>>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    patterns
        .into_iter()
        .map(|p| Regex::new(p.as_ref()).map_err(Into::into))
        .collect()
}

/// [`Preprocessor::preprocess`] with the default configuration.
pub fn preprocess(raw: &str) -> Option<String> {
    Preprocessor::default().preprocess(raw)
}
