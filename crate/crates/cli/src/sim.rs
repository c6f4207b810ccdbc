use std::fs;
use std::io::Write;

use logdrift::io::{read_detections, DetectionRecord, ReadOptions};
use logdrift::simulator::{pool_seed, run_scenario, SyntheticPools};
use logdrift::{evaluate, CountVector, ScenarioConfig};
use serde::Serialize;

use crate::monitor::VectorReader;
use crate::support::{read_input, read_json, CmdResult, Failure, Output};
use crate::{Context, EvalArgs, SimulateArgs};

fn load_scenario(ctx: &Context, path: Option<&std::path::Path>) -> CmdResult<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

#[derive(Serialize)]
#[serde(untagged)]
enum TraceLine {
    Step(logdrift::BfEntry),
    Skipped { t: u64, skipped: bool },
}

pub fn simulate(ctx: &Context, args: SimulateArgs) -> CmdResult {
    let s = &ctx.settings;
    let cfg = load_scenario(ctx, args.scenario.as_deref())?;
    cfg.validate()?;

    let (normal, anomalous): (Vec<CountVector>, Vec<CountVector>) =
        match (&args.pool_n, &args.pool_a) {
            (Some(n), Some(a)) => {
                let n = VectorReader::open(Some(n), None, ReadOptions::default())?.collect()?;
                let opts = ReadOptions {
                    expected_len: n.first().map(CountVector::len),
                    require_integer: false,
                };
                let a = VectorReader::open(Some(a), None, opts)?.collect()?;
                (n, a)
            }
            _ => {
                let d = SyntheticPools::default();
                let pools = SyntheticPools {
                    templates: s.pick(
                        args.synthetic_templates,
                        "synthetic_templates",
                        d.templates,
                    )?,
                    normal_support: s.pick(
                        args.normal_support,
                        "normal_support",
                        d.normal_support,
                    )?,
                    overlap: s.pick(args.overlap, "overlap", d.overlap)?,
                    draws: s.pick(args.draws, "draws", d.draws)?,
                    pool_size: s.pick(args.pool_size, "pool_size", d.pool_size)?,
                };
                if !args.synthetic {
                    ctx.debug("no pools given; generating synthetic pools");
                }
                let g = pools.generate(pool_seed(cfg.seed))?;
                (g.normal, g.anomalous)
            }
        };

    let reps = run_scenario(&cfg, &normal, &anomalous)?;

    if let Some(dir) = &args.emit_traces {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        for rep in &reps {
            let mut steps: Vec<TraceLine> = rep
                .trace
                .entries
                .iter()
                .copied()
                .map(TraceLine::Step)
                .collect();
            steps.extend(
                rep.trace
                    .skipped
                    .iter()
                    .map(|&t| TraceLine::Skipped { t, skipped: true }),
            );
            steps.sort_by_key(|l| match l {
                TraceLine::Step(e) => e.t,
                TraceLine::Skipped { t, .. } => *t,
            });
            let mut out = Output::create(Some(&dir.join(format!("trace_r{}.jsonl", rep.r))))?;
            for l in &steps {
                writeln!(out, "{}", serde_json::to_string(l)?)?;
            }
            out.commit()?;
        }
    }

    let mut out = Output::create(args.output.as_deref())?;
    for rep in &reps {
        writeln!(
            out,
            "{}",
            serde_json::to_string(&DetectionRecord { r: rep.r, d: rep.d })?
        )?;
    }
    out.commit()?;

    let ds: Vec<u64> = reps.iter().map(|r| r.d).collect();
    if let Ok(m) = evaluate(&ds, cfg.t_s, cfg.detector.grace) {
        ctx.note(format!(
            "R = {}: TPR {:.3}, FPR {:.3}, FNR {:.3}, ADD {}",
            ds.len(),
            m.tpr,
            m.fpr,
            m.fnr,
            m.add.map_or("n/a".to_string(), |a| format!("{a:.1}"))
        ));
    }
    Ok(0)
}

pub fn eval(ctx: &Context, args: EvalArgs) -> CmdResult {
    let s = &ctx.settings;
    let scenario = match s.pick_opt(args.scenario.clone(), "scenario")? {
        Some(p) => Some(load_scenario(ctx, Some(&p))?),
        None => None,
    };
    let t_s = s
        .pick_opt(args.t_s, "t_s")?
        .or(scenario.as_ref().map(|c| c.t_s))
        .ok_or_else(|| Failure::input("--t-s or --scenario is required"))?;
    let grace = s
        .pick_opt(args.grace, "grace")?
        .or(scenario.as_ref().map(|c| c.detector.grace))
        .unwrap_or(logdrift::detector::DEFAULT_GRACE);
    let records = read_detections(&read_input(args.input.as_deref())?)?;
    let ds: Vec<u64> = records.iter().map(|r| r.d).collect();
    let metrics = evaluate(&ds, t_s, grace)?;
    let mut out = Output::create(args.output.as_deref())?;
    out.write_json(&metrics)?;
    out.commit()?;
    Ok(0)
}
