use std::collections::HashMap;

use crate::templates::{TemplateSet, WILDCARD};

/// Destination slot of a log line inside a count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Matched template id (1-based).
    Template(u32),
    /// Unmatched, contains an error keyword.
    UnknownError,
    /// Unmatched, no error keyword.
    UnknownNormal,
}

impl Slot {
    /// 1-based slot index: `1..=K`, `K+1` for `unk_error`, `K+2` for `unk_normal`.
    pub fn index(self, k: usize) -> usize {
        match self {
            Slot::Template(id) => id as usize,
            Slot::UnknownError => k + 1,
            Slot::UnknownNormal => k + 2,
        }
    }

    /// 0-based storage offset inside a count vector.
    pub fn offset(self, k: usize) -> usize {
        self.index(k) - 1
    }

    pub fn is_unknown(self) -> bool {
        !matches!(self, Slot::Template(_))
    }
}

#[derive(Debug, Clone)]
enum Token {
    Any,
    Literal(String),
}

/// Precompiled template lookup. Templates are bucketed by token count and
/// scanned in id order, so the lowest matching id wins.
#[derive(Debug, Clone)]
pub struct Matcher {
    k: usize,
    by_len: HashMap<usize, Vec<(u32, Vec<Token>)>>,
    error_keywords: Vec<String>,
}

impl Matcher {
    pub fn new(ts: &TemplateSet) -> Self {
        let mut by_len: HashMap<usize, Vec<(u32, Vec<Token>)>> = HashMap::new();
        for t in ts.templates() {
            let tokens: Vec<Token> = t
                .pattern
                .split_whitespace()
                .map(|tok| {
                    if tok == WILDCARD {
                        Token::Any
                    } else {
                        Token::Literal(tok.to_string())
                    }
                })
                .collect();
            by_len.entry(tokens.len()).or_default().push((t.id, tokens));
        }
        Self {
            k: ts.size(),
            by_len,
            error_keywords: ts.error_keywords().to_vec(),
        }
    }

    /// Number of templates `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn match_line(&self, line: &str) -> Slot {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if let Some(candidates) = self.by_len.get(&tokens.len()) {
            let hit = candidates.iter().find(|(_, pattern)| {
                pattern.iter().zip(&tokens).all(|(p, t)| match p {
                    Token::Any => true,
                    Token::Literal(lit) => lit == t,
                })
            });
            if let Some((id, _)) = hit {
                return Slot::Template(*id);
            }
        }
        let lower = line.to_lowercase();
        if self
            .error_keywords
            .iter()
            .any(|k| lower.contains(k.as_str()))
        {
            Slot::UnknownError
        } else {
            Slot::UnknownNormal
        }
    }
}

/// Matches one preprocessed line, returning the 1-based slot index.
///
/// Builds a throwaway [`Matcher`]; prefer reusing one when matching many lines.
pub fn match_template(line: &str, ts: &TemplateSet) -> usize {
    Matcher::new(ts).match_line(line).index(ts.size())
}
