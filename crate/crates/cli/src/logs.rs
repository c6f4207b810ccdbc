use std::io::{BufRead, Write};
use std::path::Path;

use logdrift::io::{self, LogFormat, VectorFormat};
use logdrift::templater::{
    check_training, mine_templates_with_counts, WindowCounter, DEFAULT_SIMILARITY_THRESHOLD,
};
use logdrift::{CountVector, Matcher, Preprocessor, TemplateSet, WindowSpec};
use serde::Serialize;

use crate::support::{open_input, read_json, write_file, CmdResult, Output, Settings};
use crate::{Context, LogArgs, LogFormatArg, TemplatesArgs, VectorFormatArg, VectorsArgs};

pub const DEFAULT_WIDTH_SECS: f64 = 10.0;

/// Log layout and message cleaning shared by every command that reads raw logs.
pub struct LogSetup {
    pub format: LogFormat,
    pub preprocessor: Preprocessor,
}

impl LogSetup {
    pub fn from_args(settings: &Settings, args: LogArgs) -> CmdResult<Self> {
        let kind = settings.pick(args.log_format, "log_format", LogFormatArg::Text)?;
        let pattern: Option<String> = settings.pick_opt(args.log_pattern, "log_pattern")?;
        let format = match (kind, pattern) {
            (LogFormatArg::Jsonl, _) => LogFormat::Jsonl,
            (LogFormatArg::Text, Some(p)) => LogFormat::text(&p)?,
            (LogFormatArg::Text, None) => LogFormat::default(),
        };
        let prefix_rules = settings.list(args.prefix_rules, "prefix_rule")?;
        let masks = settings.list(args.masks, "mask")?;
        let preprocessor = if masks.is_empty() {
            Preprocessor::with_prefix_rules(&prefix_rules)?
        } else {
            Preprocessor::new(&prefix_rules, &masks)?
        };
        Ok(Self {
            format,
            preprocessor,
        })
    }
}

pub fn window_spec(settings: &Settings, width: Option<f64>) -> CmdResult<WindowSpec> {
    Ok(WindowSpec::from_secs(settings.pick(
        width,
        "width",
        DEFAULT_WIDTH_SECS,
    )?)?)
}

/// Output format: explicit flag, then the file extension, then CSV.
pub fn output_format(flag: Option<VectorFormatArg>, path: Option<&Path>) -> VectorFormat {
    flag.map(Into::into)
        .or_else(|| path.and_then(VectorFormat::from_path))
        .unwrap_or(VectorFormat::Csv)
}

#[derive(Serialize)]
struct TemplateReport<'a> {
    id: u32,
    pattern: &'a str,
    lines: usize,
}

#[derive(Serialize)]
struct MiningReport<'a> {
    k: usize,
    lines: usize,
    templates: Vec<TemplateReport<'a>>,
}

pub fn templates(ctx: &Context, args: TemplatesArgs) -> CmdResult {
    let s = &ctx.settings;
    let threshold = s.pick(args.threshold, "threshold", DEFAULT_SIMILARITY_THRESHOLD)?;
    let keywords = s.list(args.error_keywords, "error_keyword")?;
    let setup = LogSetup::from_args(s, args.log)?;

    let mut lines = Vec::new();
    for (i, raw) in open_input(args.input.as_deref())?.lines().enumerate() {
        let msg = io::training_message(&raw?, i + 1, &setup.format)?;
        lines.extend(setup.preprocessor.preprocess(&msg));
    }
    let outcome = mine_templates_with_counts(&lines, threshold)?;
    let set = if keywords.is_empty() {
        outcome.templates
    } else {
        TemplateSet::new(outcome.templates.templates().to_vec(), keywords)?
    };

    let report = MiningReport {
        k: set.size(),
        lines: lines.len(),
        templates: set
            .templates()
            .iter()
            .zip(&outcome.line_counts)
            .map(|(t, &n)| TemplateReport {
                id: t.id,
                pattern: &t.pattern,
                lines: n,
            })
            .collect(),
    };
    let mut out = Output::create(args.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &set)?;
    writeln!(out)?;
    match &args.report {
        Some(path) => write_file(path, &(serde_json::to_string_pretty(&report)? + "\n"))?,
        None => {
            ctx.note(format!(
                "mined {} templates from {} lines",
                report.k, report.lines
            ));
            for t in &report.templates {
                ctx.debug(format!("{:>6}  {}  {}", t.lines, t.id, t.pattern));
            }
        }
    }
    out.commit()?;
    Ok(0)
}

pub fn vectors(ctx: &Context, args: VectorsArgs) -> CmdResult {
    let s = &ctx.settings;
    let set: TemplateSet = read_json(&args.templates)?;
    let spec = window_spec(s, args.width)?;
    let training = s.switch(args.training, "training")?;
    let format = output_format(s.pick_opt(args.format, "format")?, args.output.as_deref());
    let setup = LogSetup::from_args(s, args.log)?;
    let matcher = Matcher::new(&set);
    let k = set.size();

    let mut out = Output::create(args.output.as_deref())?;
    if format == VectorFormat::Csv {
        out.write_line(&io::csv_header(set.vector_len()))?;
    }
    let emit = |c: CountVector, out: &mut Output| -> CmdResult<()> {
        if training {
            check_training(std::slice::from_ref(&c), k)?;
        }
        out.write_line(&match format {
            VectorFormat::Csv => io::csv_row(&c),
            VectorFormat::Jsonl => io::jsonl_row(&c),
        })
    };

    let mut counter = WindowCounter::new(&matcher, &setup.preprocessor, spec);
    let mut windows = 0usize;
    for (i, raw) in open_input(args.input.as_deref())?.lines().enumerate() {
        let Some(record) = io::parse_log_line(&raw?, i + 1, &setup.format)? else {
            continue;
        };
        if let Some(c) = counter.push(&record)? {
            emit(c, &mut out)?;
            windows += 1;
        }
    }
    if let Some(c) = counter.finish() {
        emit(c, &mut out)?;
        windows += 1;
    }
    out.commit()?;
    ctx.debug(format!("wrote {windows} windows"));
    Ok(0)
}
