//! Simplified template miner.
//!
//! Lines are partitioned by token count, then clustered greedily: a line joins
//! the first cluster whose template it already matches, otherwise the most
//! similar cluster whose token agreement ratio reaches the threshold. Positions
//! where a joining line disagrees with the cluster template become `<*>`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::templates::{TemplateSet, DEFAULT_ERROR_KEYWORDS, WILDCARD};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.5;

/// Mined templates together with how many training lines each cluster absorbed.
#[derive(Debug, Clone)]
pub struct MiningOutcome {
    pub templates: TemplateSet,
    /// `line_counts[i]` is the number of training lines assigned to template `i + 1`.
    pub line_counts: Vec<usize>,
}

struct Cluster {
    tokens: Vec<String>,
    lines: usize,
    order: usize,
}

impl Cluster {
    fn covers(&self, line: &[&str]) -> bool {
        self.tokens
            .iter()
            .zip(line)
            .all(|(t, l)| t == WILDCARD || t == l)
    }

    fn similarity(&self, line: &[&str]) -> f64 {
        let agree = self
            .tokens
            .iter()
            .zip(line)
            .filter(|(t, l)| t.as_str() != WILDCARD && t == *l)
            .count();
        agree as f64 / line.len() as f64
    }

    fn absorb(&mut self, line: &[&str]) {
        for (t, l) in self.tokens.iter_mut().zip(line) {
            if t != l {
                *t = WILDCARD.to_string();
            }
        }
        self.lines += 1;
    }
}

/// Mines templates from preprocessed training lines.
pub fn mine_templates<S: AsRef<str>>(
    lines: &[S],
    similarity_threshold: f64,
) -> Result<TemplateSet> {
    mine_templates_with_counts(lines, similarity_threshold).map(|o| o.templates)
}

pub fn mine_templates_with_counts<S: AsRef<str>>(
    lines: &[S],
    similarity_threshold: f64,
) -> Result<MiningOutcome> {
    if !(similarity_threshold > 0.0 && similarity_threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "similarity threshold must lie in (0, 1], got {similarity_threshold}"
        )));
    }
    let mut groups: HashMap<usize, Vec<Cluster>> = HashMap::new();
    let mut next_order = 0;
    for line in lines {
        let tokens: Vec<&str> = line.as_ref().split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let clusters = groups.entry(tokens.len()).or_default();
        if let Some(c) = clusters.iter_mut().find(|c| c.covers(&tokens)) {
            c.lines += 1;
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in clusters.iter().enumerate() {
            let sim = c.similarity(&tokens);
            if sim >= similarity_threshold && best.is_none_or(|(_, s)| sim > s) {
                best = Some((i, sim));
            }
        }
        match best {
            Some((i, _)) => clusters[i].absorb(&tokens),
            None => {
                clusters.push(Cluster {
                    tokens: tokens.iter().map(|t| t.to_string()).collect(),
                    lines: 1,
                    order: next_order,
                });
                next_order += 1;
            }
        }
    }
    if next_order == 0 {
        return Err(Error::EmptyCorpus);
    }

    let mut clusters: Vec<Cluster> = groups.into_values().flatten().collect();
    clusters.sort_by_key(|c| c.order);

    // Clusters can converge onto the same pattern; keep the earliest.
    let mut patterns: Vec<String> = Vec::new();
    let mut line_counts: Vec<usize> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for c in clusters {
        let pattern = c.tokens.join(" ");
        match seen.get(&pattern) {
            Some(&i) => line_counts[i] += c.lines,
            None => {
                seen.insert(pattern.clone(), patterns.len());
                patterns.push(pattern);
                line_counts.push(c.lines);
            }
        }
    }
    let keywords = DEFAULT_ERROR_KEYWORDS
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(MiningOutcome {
        templates: TemplateSet::from_patterns(patterns, keywords)?,
        line_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templater::Matcher;
    use proptest::prelude::*;

    fn patterns(ts: &TemplateSet) -> Vec<&str> {
        ts.templates().iter().map(|t| t.pattern.as_str()).collect()
    }

    #[test]
    fn identical_lines_give_one_template() {
        let ts = mine_templates(&["a b c", "a b c"], 0.5).unwrap();
        assert_eq!(patterns(&ts), vec!["a b c"]);
    }

    #[test]
    fn differing_position_becomes_wildcard() {
        let ts = mine_templates(&["get user 1", "get user 2"], 0.5).unwrap();
        assert_eq!(patterns(&ts), vec!["get user <*>"]);
    }

    #[test]
    fn token_count_partitions() {
        let ts = mine_templates(&["get user 1", "put item x y"], 0.5).unwrap();
        assert_eq!(patterns(&ts), vec!["get user 1", "put item x y"]);
    }

    #[test]
    fn threshold_controls_merging() {
        let lines = ["conn from a closed", "conn from b closed", "job x done ok"];
        let loose = mine_templates(&lines, 0.5).unwrap();
        assert_eq!(
            patterns(&loose),
            vec!["conn from <*> closed", "job x done ok"]
        );
        let strict = mine_templates(&lines, 1.0).unwrap();
        assert_eq!(strict.size(), 3);
    }

    #[test]
    fn counts_follow_assignment() {
        let out = mine_templates_with_counts(&["a 1", "a 2", "b c d", "a 3"], 0.5).unwrap();
        assert_eq!(patterns(&out.templates), vec!["a <*>", "b c d"]);
        assert_eq!(out.line_counts, vec![3, 1]);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            mine_templates::<&str>(&[], 0.5),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            mine_templates(&["", "  "], 0.5),
            Err(Error::EmptyCorpus)
        ));
        assert!(mine_templates(&["a"], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mined_set_covers_its_corpus(
            lines in prop::collection::vec(
                prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "id", "7", "x"]), 1..6)
                    .prop_map(|t| t.join(" ")),
                1..60),
            threshold in 0.05f64..=1.0,
        ) {
            let ts = mine_templates(&lines, threshold).unwrap();
            let m = Matcher::new(&ts);
            for l in &lines {
                prop_assert!(!m.match_line(l).is_unknown(), "{l} unmatched");
            }
        }
    }
}
