//! Interchange formats: count vectors (CSV, JSONL), raw logs (text, JSONL),
//! and detection lists.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDateTime};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::templater::LogRecord;
use crate::vector::CountVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Csv,
    Jsonl,
}

impl VectorFormat {
    /// Guesses from the file extension; `None` when it is not recognised.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(VectorFormat::Csv),
            "jsonl" | "ndjson" | "json" => Some(VectorFormat::Jsonl),
            _ => None,
        }
    }

    /// Guesses from content: JSONL records start with `{`.
    pub fn sniff(content: &str) -> Self {
        match content.trim_start().chars().next() {
            Some('{') => VectorFormat::Jsonl,
            _ => VectorFormat::Csv,
        }
    }
}

/// Checks applied while reading count vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Required vector length (`K + 2`), typically from a template set.
    pub expected_len: Option<usize>,
    /// Reject fractional counts (needed by the chi-squared fit).
    pub require_integer: bool,
}

#[derive(Serialize, Deserialize)]
struct VectorRecord {
    t: u64,
    counts: Vec<f64>,
}

/// Incremental parser for count vector streams, one line at a time.
///
/// CSV input must start with the `t,c1,...,cN` header; JSONL records are
/// `{"t": int, "counts": [...]}`. Every vector must have the same length.
#[derive(Debug, Clone)]
pub struct VectorLineParser {
    format: VectorFormat,
    opts: ReadOptions,
    line: usize,
    seen_header: bool,
    len: Option<usize>,
}

impl VectorLineParser {
    pub fn new(format: VectorFormat, opts: ReadOptions) -> Self {
        Self {
            format,
            opts,
            line: 0,
            seen_header: false,
            len: opts.expected_len,
        }
    }

    fn err(&self, message: String) -> Error {
        Error::Parse {
            line: self.line,
            message,
        }
    }

    /// Parses the next line. Headers and blank lines yield `None`.
    pub fn parse_line(&mut self, raw: &str) -> Result<Option<CountVector>> {
        self.line += 1;
        let raw = raw.trim();
        if raw.is_empty() {
            return Ok(None);
        }
        let c = match self.format {
            VectorFormat::Csv if !self.seen_header => {
                self.parse_header(raw)?;
                return Ok(None);
            }
            VectorFormat::Csv => self.parse_csv_row(raw)?,
            VectorFormat::Jsonl => {
                let rec: VectorRecord =
                    serde_json::from_str(raw).map_err(|e| self.err(e.to_string()))?;
                CountVector::new(rec.counts, rec.t)?
            }
        };
        if let Some(len) = self.len {
            if c.len() != len {
                return Err(self.err(format!("expected {len} counts, found {}", c.len())));
            }
        }
        self.len = Some(c.len());
        if self.opts.require_integer {
            if let Some((index, &value)) = c
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| v.fract() != 0.0)
            {
                return Err(Error::NonIntegerCount { index, value });
            }
        }
        Ok(Some(c))
    }

    fn parse_header(&mut self, raw: &str) -> Result<()> {
        let mut cols = raw.split(',').map(str::trim);
        if cols.next() != Some("t") {
            return Err(self.err("first column must be `t`".into()));
        }
        let mut n = 0;
        for (i, h) in cols.enumerate() {
            if h != format!("c{}", i + 1) {
                return Err(self.err(format!(
                    "column {} must be `c{}`, found `{h}`",
                    i + 2,
                    i + 1
                )));
            }
            n += 1;
        }
        if let Some(len) = self.len {
            if n != len {
                return Err(self.err(format!("expected {len} count columns, found {n}")));
            }
        }
        self.len = Some(n);
        self.seen_header = true;
        Ok(())
    }

    fn parse_csv_row(&self, raw: &str) -> Result<CountVector> {
        let mut fields = raw.split(',').map(str::trim);
        let t_field = fields.next().unwrap_or_default();
        let t = t_field
            .parse::<u64>()
            .map_err(|e| self.err(format!("bad t {t_field:?}: {e}")))?;
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| self.err(format!("bad count {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        CountVector::new(values, t)
    }
}

pub fn read_vectors(
    content: &str,
    format: VectorFormat,
    opts: ReadOptions,
) -> Result<Vec<CountVector>> {
    let mut parser = VectorLineParser::new(format, opts);
    let mut out = Vec::new();
    for line in content.lines() {
        out.extend(parser.parse_line(line)?);
    }
    if format == VectorFormat::Csv && !parser.seen_header {
        return Err(Error::Parse {
            line: 1,
            message: "missing `t,c1,...` header".into(),
        });
    }
    Ok(out)
}

/// Reads `t,c1,...,cN` CSV.
pub fn read_vectors_csv(content: &str, opts: ReadOptions) -> Result<Vec<CountVector>> {
    read_vectors(content, VectorFormat::Csv, opts)
}

/// Reads `{"t": int, "counts": [...]}` records, one per line.
pub fn read_vectors_jsonl(content: &str, opts: ReadOptions) -> Result<Vec<CountVector>> {
    read_vectors(content, VectorFormat::Jsonl, opts)
}

pub fn csv_header(len: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=len {
        h.push_str(&format!(",c{i}"));
    }
    h
}

/// One CSV row. Values use the shortest representation that round-trips.
pub fn csv_row(c: &CountVector) -> String {
    let mut row = c.window_index().to_string();
    for v in c.values() {
        row.push(',');
        row.push_str(&v.to_string());
    }
    row
}

pub fn jsonl_row(c: &CountVector) -> String {
    serde_json::to_string(&VectorRecord {
        t: c.window_index(),
        counts: c.values().to_vec(),
    })
    .expect("count vectors are finite")
}

pub fn write_vectors<W: Write>(
    mut out: W,
    vectors: &[CountVector],
    format: VectorFormat,
) -> Result<()> {
    if format == VectorFormat::Csv {
        let len = vectors.first().map_or(0, CountVector::len);
        writeln!(out, "{}", csv_header(len))?;
    }
    for c in vectors {
        let row = match format {
            VectorFormat::Csv => csv_row(c),
            VectorFormat::Jsonl => jsonl_row(c),
        };
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Raw log layout.
#[derive(Debug, Clone)]
pub enum LogFormat {
    /// One record per line; the regex must have `ts` and `msg` groups.
    Text(Regex),
    /// `{"ts": epoch_ms | RFC3339, "msg": string}` per line.
    Jsonl,
}

pub const DEFAULT_TEXT_LOG_PATTERN: &str = r"^\s*(?P<ts>\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?|\d{13}|\d{10})\s+(?P<msg>.*)$";

impl Default for LogFormat {
    fn default() -> Self {
        LogFormat::Text(default_text_regex().clone())
    }
}

fn default_text_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(DEFAULT_TEXT_LOG_PATTERN).expect("default log pattern compiles"))
}

impl LogFormat {
    pub fn text(pattern: &str) -> Result<Self> {
        let re = Regex::new(pattern)?;
        let names: Vec<_> = re.capture_names().flatten().collect();
        if !names.contains(&"ts") || !names.contains(&"msg") {
            return Err(Error::InvalidConfig(
                "log pattern needs named groups `ts` and `msg`".into(),
            ));
        }
        Ok(LogFormat::Text(re))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonTimestamp {
    Millis(i64),
    Text(String),
}

#[derive(Deserialize)]
struct JsonLog {
    ts: JsonTimestamp,
    msg: String,
}

/// Parses epoch seconds (10 digits), epoch milliseconds (13 digits) or an
/// RFC 3339 / ISO-8601 timestamp (naive values are taken as UTC).
pub fn parse_timestamp(ts: &str) -> Option<i64> {
    let ts = ts.trim();
    if !ts.is_empty() && ts.bytes().all(|b| b.is_ascii_digit()) {
        let n: i64 = ts.parse().ok()?;
        return Some(if ts.len() <= 10 { n * 1000 } else { n });
    }
    let normalized = ts.replacen(' ', "T", 1).replace(',', ".");
    if let Ok(dt) = DateTime::parse_from_rfc3339(&normalized) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%dT%H:%M:%S%.f%#z"] {
        if let Ok(dt) = DateTime::parse_from_str(&normalized, fmt) {
            return Some(dt.timestamp_millis());
        }
    }
    NaiveDateTime::parse_from_str(&normalized, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Parses one raw log line. Blank lines yield `None`.
pub fn parse_log_line(raw: &str, line: usize, format: &LogFormat) -> Result<Option<LogRecord>> {
    if raw.trim().is_empty() {
        return Ok(None);
    }
    let err = |message: String| Error::Parse { line, message };
    match format {
        LogFormat::Text(re) => {
            let caps = re
                .captures(raw)
                .ok_or_else(|| err("line does not start with a timestamp".into()))?;
            let ts = &caps["ts"];
            let timestamp_ms =
                parse_timestamp(ts).ok_or_else(|| err(format!("unparseable timestamp {ts:?}")))?;
            Ok(Some(LogRecord::new(timestamp_ms, &caps["msg"])))
        }
        LogFormat::Jsonl => {
            let rec: JsonLog = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            let timestamp_ms = match rec.ts {
                JsonTimestamp::Millis(ms) => ms,
                JsonTimestamp::Text(s) => parse_timestamp(&s)
                    .ok_or_else(|| err(format!("unparseable timestamp {s:?}")))?,
            };
            if timestamp_ms < 0 {
                return Err(err("negative timestamp".into()));
            }
            Ok(Some(LogRecord::new(timestamp_ms, rec.msg)))
        }
    }
}

pub fn read_log_records<R: BufRead>(reader: R, format: &LogFormat) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(rec) = parse_log_line(&line?, i + 1, format)? {
            out.push(rec);
        }
    }
    Ok(out)
}

/// Message text of a training line. Timestamps are optional here: text lines
/// that do not match the pattern are used whole.
pub fn training_message(raw: &str, line: usize, format: &LogFormat) -> Result<String> {
    match format {
        LogFormat::Text(re) => Ok(re
            .captures(raw)
            .map_or_else(|| raw.to_string(), |c| c["msg"].to_string())),
        LogFormat::Jsonl => {
            if raw.trim().is_empty() {
                return Ok(String::new());
            }
            #[derive(Deserialize)]
            struct Msg {
                msg: String,
            }
            let m: Msg = serde_json::from_str(raw).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            Ok(m.msg)
        }
    }
}

/// One repetition outcome: `{"r": int, "d": int}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub r: u64,
    pub d: u64,
}

pub fn read_detections(content: &str) -> Result<Vec<DetectionRecord>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
