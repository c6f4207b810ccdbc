use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wildcard token: matches exactly one token of a log line.
pub const WILDCARD: &str = "<*>";

pub const DEFAULT_ERROR_KEYWORDS: &[&str] = &[
    "error",
    "exception",
    "fail",
    "failed",
    "failure",
    "fatal",
    "panic",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: u32,
    pub pattern: String,
}

/// The template universe of one application: `K` patterns plus the keyword
/// list that routes unmatched lines to `unk_error` or `unk_normal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplateSet")]
pub struct TemplateSet {
    templates: Vec<Template>,
    error_keywords: Vec<String>,
}

#[derive(Deserialize)]
struct RawTemplateSet {
    templates: Vec<Template>,
    #[serde(default = "default_keywords")]
    error_keywords: Vec<String>,
}

fn default_keywords() -> Vec<String> {
    DEFAULT_ERROR_KEYWORDS
        .iter()
        .map(|s| s.to_string())
        .collect()
}

impl TryFrom<RawTemplateSet> for TemplateSet {
    type Error = Error;

    fn try_from(raw: RawTemplateSet) -> Result<Self> {
        TemplateSet::new(raw.templates, raw.error_keywords)
    }
}

impl TemplateSet {
    /// Validates and sorts templates by id. Ids must be exactly `1..=K`.
    pub fn new(mut templates: Vec<Template>, error_keywords: Vec<String>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::InvalidTemplateSet("no templates".into()));
        }
        templates.sort_by_key(|t| t.id);
        for (i, t) in templates.iter().enumerate() {
            if t.id as usize != i + 1 {
                return Err(Error::InvalidTemplateSet(format!(
                    "template ids must be unique and contiguous from 1, found {} at position {}",
                    t.id,
                    i + 1
                )));
            }
            if t.pattern.trim().is_empty() {
                return Err(Error::InvalidTemplateSet(format!(
                    "template {} has an empty pattern",
                    t.id
                )));
            }
        }
        let error_keywords = error_keywords
            .into_iter()
            .map(|k| k.to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        Ok(Self {
            templates,
            error_keywords,
        })
    }

    /// Builds a set from patterns, numbering them from 1 in order.
    pub fn from_patterns<I, S>(patterns: I, error_keywords: Vec<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let templates = patterns
            .into_iter()
            .enumerate()
            .map(|(i, p)| Template {
                id: i as u32 + 1,
                pattern: p.into(),
            })
            .collect();
        Self::new(templates, error_keywords)
    }

    pub fn with_default_keywords<I, S>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_patterns(patterns, default_keywords())
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn error_keywords(&self) -> &[String] {
        &self.error_keywords
    }

    /// Number of templates `K`.
    pub fn size(&self) -> usize {
        self.templates.len()
    }

    /// Length of every count vector built from this set (`K + 2`).
    pub fn vector_len(&self) -> usize {
        self.templates.len() + 2
    }
}
