use std::io::BufRead;
use std::path::Path;

use logdrift::io::{self, ReadOptions, VectorFormat, VectorLineParser};
use logdrift::templater::WindowCounter;
use logdrift::{
    build_prior, chi_squared_fit, mle, Checkpoint, CountVector, Detector, DetectorConfig,
    DirichletState, Matcher, Observation, ProbabilityVector, TemplateSet,
};
use serde::Serialize;
use serde_json::Value;

use crate::logs::{window_spec, LogSetup};
use crate::support::{
    open_input, read_input, read_json, write_file, CmdResult, Failure, Output, Settings,
    EXIT_DETECTION,
};
use crate::{Context, DetectorArgs, FitArgs, MonitorArgs, VectorFormatArg};

/// Streams count vectors from any reader. The format comes from the flag,
/// then the file extension, then the first non-blank line.
pub struct VectorReader {
    lines: std::io::Lines<Box<dyn BufRead>>,
    format: Option<VectorFormat>,
    opts: ReadOptions,
    parser: Option<VectorLineParser>,
}

impl VectorReader {
    pub fn open(
        path: Option<&Path>,
        flag: Option<VectorFormatArg>,
        opts: ReadOptions,
    ) -> CmdResult<Self> {
        let format = flag
            .map(Into::into)
            .or_else(|| path.and_then(VectorFormat::from_path));
        Ok(Self {
            lines: open_input(path)?.lines(),
            format,
            opts,
            parser: None,
        })
    }

    pub fn next_vector(&mut self) -> CmdResult<Option<CountVector>> {
        for line in self.lines.by_ref() {
            let line = line?;
            let parser = match &mut self.parser {
                Some(p) => p,
                None if line.trim().is_empty() => continue,
                None => {
                    let format = self.format.unwrap_or_else(|| VectorFormat::sniff(&line));
                    self.parser.insert(VectorLineParser::new(format, self.opts))
                }
            };
            if let Some(c) = parser.parse_line(&line)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    pub fn collect(mut self) -> CmdResult<Vec<CountVector>> {
        let mut out = Vec::new();
        while let Some(c) = self.next_vector()? {
            out.push(c);
        }
        Ok(out)
    }
}

pub fn fit(_ctx: &Context, args: FitArgs) -> CmdResult {
    let opts = ReadOptions {
        expected_len: None,
        require_integer: true,
    };
    let cs = VectorReader::open(args.input.as_deref(), args.format, opts)?.collect()?;
    let report = chi_squared_fit(&cs)?;
    let mut out = Output::create(args.output.as_deref())?;
    out.write_json(&report)?;
    out.commit()?;
    Ok(0)
}

pub fn detector_config(settings: &Settings, args: &DetectorArgs) -> CmdResult<DetectorConfig> {
    let d = DetectorConfig::default();
    let cfg = DetectorConfig {
        window: settings.pick(args.window, "window", d.window)?,
        kappa_count: settings.pick(args.kappa_count, "kappa_count", d.kappa_count)?,
        kappa_prior: settings.pick(args.kappa_prior, "kappa_prior", d.kappa_prior)?,
        epsilon: settings.pick(args.epsilon, "epsilon", d.epsilon)?,
        alpha: settings.pick(args.alpha, "alpha", d.alpha)?,
        grace: settings.pick(args.grace, "grace", d.grace)?,
        b0: settings.pick(args.b0, "b0", d.b0)?,
        lag_compat: settings.switch(args.lag_compat, "lag_compat")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a baseline: a Dirichlet state, a probability vector, or training
/// count vectors whose pooled MLE becomes the baseline.
pub fn load_prior(
    path: &Path,
    cfg: &DetectorConfig,
    expected_len: Option<usize>,
) -> CmdResult<DirichletState> {
    let text = read_input(Some(path))?;
    let json_object = serde_json::from_str::<Value>(&text)
        .ok()
        .filter(Value::is_object);
    let prior = match json_object {
        Some(v) if v.get("alpha").is_some() => serde_json::from_value::<DirichletState>(v)?,
        Some(v) if v.get("probs").is_some() => {
            let p: ProbabilityVector = serde_json::from_value(v)?;
            build_prior(&p, cfg.kappa_prior, cfg.epsilon)?
        }
        Some(_) => {
            return Err(Failure::input(format!(
                "{}: expected {{\"alpha\": [...]}} or {{\"probs\": [...]}}",
                path.display()
            )))
        }
        None => {
            let format =
                VectorFormat::from_path(path).unwrap_or_else(|| VectorFormat::sniff(&text));
            let opts = ReadOptions {
                expected_len,
                require_integer: false,
            };
            let cs = io::read_vectors(&text, format, opts)?;
            build_prior(&mle(&cs)?, cfg.kappa_prior, cfg.epsilon)?
        }
    };
    if let Some(len) = expected_len {
        if prior.alpha().len() != len {
            return Err(logdrift::Error::LengthMismatch {
                expected: len,
                actual: prior.alpha().len(),
            }
            .into());
        }
    }
    Ok(prior)
}

#[derive(Serialize)]
struct Header<'a> {
    threshold: f64,
    start_t: u64,
    config: &'a DetectorConfig,
}

#[derive(Serialize)]
struct Skipped {
    t: u64,
    skipped: bool,
}

#[derive(Serialize)]
struct Summary {
    first_detection: u64,
}

enum Source<'a> {
    Vectors(VectorReader),
    Logs {
        lines: std::io::Lines<Box<dyn BufRead>>,
        line: usize,
        setup: &'a LogSetup,
        counter: Option<WindowCounter<'a>>,
    },
}

impl Source<'_> {
    fn next_vector(&mut self) -> CmdResult<Option<CountVector>> {
        match self {
            Source::Vectors(r) => r.next_vector(),
            Source::Logs {
                lines,
                line,
                setup,
                counter,
            } => {
                let Some(active) = counter.as_mut() else {
                    return Ok(None);
                };
                for raw in lines.by_ref() {
                    *line += 1;
                    if let Some(record) = io::parse_log_line(&raw?, *line, &setup.format)? {
                        if let Some(c) = active.push(&record)? {
                            return Ok(Some(c));
                        }
                    }
                }
                Ok(counter.take().and_then(WindowCounter::finish))
            }
        }
    }
}

pub fn monitor(ctx: &Context, args: MonitorArgs) -> CmdResult {
    let s = &ctx.settings;
    let templates: Option<TemplateSet> = match s.pick_opt(args.templates.clone(), "templates")? {
        Some(path) => Some(read_json(&path)?),
        None => None,
    };
    let expected_len = templates.as_ref().map(TemplateSet::vector_len);
    let logs = s.switch(args.logs, "logs")?;
    let exit_on_detect = s.switch(args.exit_on_detect, "exit_on_detect")?;

    let mut detector = match &args.checkpoint_in {
        Some(path) => {
            let cp: Checkpoint = read_json(path)?;
            ctx.debug(format!(
                "resuming at t = {} with the checkpointed configuration",
                cp.t
            ));
            Detector::restore(cp)?
        }
        None => {
            let cfg = detector_config(s, &args.detector)?;
            let prior_path: std::path::PathBuf =
                s.pick_opt(args.prior.clone(), "prior")?.ok_or_else(|| {
                    Failure::input("--prior is required unless resuming from --checkpoint-in")
                })?;
            let prior = load_prior(&prior_path, &cfg, expected_len)?;
            Detector::new(prior, cfg)?
        }
    };
    let len = detector.prior().alpha().len();
    if let Some(expected) = expected_len {
        if expected != len {
            return Err(logdrift::Error::LengthMismatch {
                expected,
                actual: len,
            }
            .into());
        }
    }

    let setup;
    let matcher;
    let mut source = if logs {
        let set = templates
            .as_ref()
            .ok_or_else(|| Failure::input("--logs needs --templates"))?;
        setup = LogSetup::from_args(s, args.log)?;
        matcher = Matcher::new(set);
        Source::Logs {
            lines: open_input(args.input.as_deref())?.lines(),
            line: 0,
            setup: &setup,
            counter: Some(WindowCounter::new(
                &matcher,
                &setup.preprocessor,
                window_spec(s, args.width)?,
            )),
        }
    } else {
        let opts = ReadOptions {
            expected_len: Some(len),
            require_integer: false,
        };
        Source::Vectors(VectorReader::open(
            args.input.as_deref(),
            args.format,
            opts,
        )?)
    };

    let mut out = Output::create(args.output.as_deref())?;
    out.write_json(&Header {
        threshold: detector.threshold(),
        start_t: detector.t(),
        config: detector.config(),
    })?;
    let mut first_detection = 0;
    let mut code = 0;
    while let Some(c) = source.next_vector()? {
        match detector.observe(&c)? {
            Observation::Scored(e) => {
                out.write_json(&e)?;
                if e.flagged && first_detection == 0 {
                    first_detection = e.t;
                    ctx.note(format!(
                        "drift detected at t = {} (log BF {:.4})",
                        e.t, e.log_bf
                    ));
                    if exit_on_detect {
                        code = EXIT_DETECTION;
                        break;
                    }
                }
            }
            Observation::Skipped { t } => out.write_json(&Skipped { t, skipped: true })?,
        }
    }
    out.write_json(&Summary { first_detection })?;
    if let Some(path) = &args.checkpoint_out {
        write_file(
            path,
            &(serde_json::to_string(&detector.checkpoint())? + "\n"),
        )?;
    }
    out.commit()?;
    Ok(code)
}
