//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use logdrift::detector::{build_prior, first_detection, lg, run, DetectorConfig, Horizon};
use logdrift::io::read_detections;
use logdrift::simulator::{repetition_rng, run_scenario, sample_multinomial, Repetition};
use logdrift::templater::{check_training, mine_templates, window_counts, Matcher, Slot};
use logdrift::{
    chi_squared_fit, chi_squared_sf, evaluate, mle, CountVector, LogRecord, Preprocessor,
    ProbabilityVector, ScenarioConfig, SyntheticPools, WindowSpec,
};
use rand::Rng;
use serde::Deserialize;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[derive(Deserialize)]
struct OracleCase {
    x: Vec<f64>,
    lg: String,
}

fn lg_oracle() -> Outcome {
    let cases: Vec<OracleCase> =
        serde_json::from_str(include_str!("../../core/tests/data/lg_oracle.json"))
            .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let got: Vec<f64> = cases.iter().map(|c| lg(&c.x).unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    let worst = cases
        .iter()
        .zip(&got)
        .map(|(c, g)| (g - c.lg.parse::<f64>().unwrap()).abs())
        .fold(0.0, f64::max);
    check(
        cases.len() == 1000 && cases.iter().all(|c| c.x.len() <= 50) && worst <= 1e-9 && secs < 1.0,
        format!(
            "{} vectors, max |err| {worst:.2e}, {secs:.3} s",
            cases.len()
        ),
    )
}

fn chi_squared_backend() -> Outcome {
    let a = chi_squared_sf(2.0, 2);
    let b = chi_squared_sf(3.841, 1);
    let exact: Vec<CountVector> = [
        [10.0, 20.0, 30.0, 0.0],
        [20.0, 40.0, 60.0, 0.0],
        [5.0, 10.0, 15.0, 0.0],
    ]
    .iter()
    .map(|r| CountVector::new(r.to_vec(), 0).unwrap())
    .collect();
    let fit = chi_squared_fit(&exact).map_err(|e| e.to_string())?;
    check(
        (a - (-1.0f64).exp()).abs() <= 1e-10
            && (b - 0.05).abs() <= 1e-3
            && fit.statistic == 0.0
            && fit.p_value == 1.0,
        format!(
            "sf(2,2) = {a:.12}, sf(3.841,1) = {b:.6}, exact fit X = {}, p = {}",
            fit.statistic, fit.p_value
        ),
    )
}

fn random_stream(seed: u64, len: usize, dim: usize) -> Vec<CountVector> {
    let mut rng = repetition_rng(seed, 0);
    let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 0.02).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let n = rng.random_range(20..400);
    (0..len)
        .map(|t| CountVector::new(sample_multinomial(&probs, n, &mut rng), t as u64).unwrap())
        .collect()
}

fn window_equivalence() -> Outcome {
    let dim = 12;
    let p = ProbabilityVector::new((1..=dim).map(|i| i as f64 / 78.0).collect()).unwrap();
    let prior = build_prior(&p, 100.0, 1e-6).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let cs = random_stream(1000 + seed, 80, dim);
        let traces: Vec<Vec<f64>> = [
            Horizon::Finite(80),
            Horizon::Finite(200),
            Horizon::Unbounded,
        ]
        .into_iter()
        .map(|window| {
            let cfg = DetectorConfig {
                window,
                ..DetectorConfig::default()
            };
            run(&prior, &cs, &cfg).unwrap().log_bf()
        })
        .collect();
        for other in &traces[1..] {
            if other.len() != traces[0].len() {
                return Err("trace lengths differ".into());
            }
            for (a, b) in traces[0].iter().zip(other) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(
        worst <= 1e-10,
        format!("20 streams x 80, max |diff| {worst:.2e}"),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn null_stability() -> Outcome {
    let start = Instant::now();
    let pools = SyntheticPools::default().generate(4242).unwrap();
    let cfg = DetectorConfig {
        window: Horizon::Finite(100),
        alpha: 0.05,
        ..DetectorConfig::default()
    };
    let prior = build_prior(&mle(&pools.normal).unwrap(), cfg.kappa_prior, cfg.epsilon).unwrap();
    let mut detections = 0;
    let mut worst_median = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let mut rng = repetition_rng(seed, 0);
        let cs: Vec<CountVector> = (1..=300)
            .map(|t| {
                CountVector::new(sample_multinomial(pools.p_n.probs(), 200, &mut rng), t).unwrap()
            })
            .collect();
        let trace = run(&prior, &cs, &cfg).unwrap();
        if first_detection(&trace, &cfg) != 0 {
            detections += 1;
        }
        let tail: Vec<f64> = trace
            .entries
            .iter()
            .filter(|e| (100..=300).contains(&e.t))
            .map(|e| e.log_bf)
            .collect();
        worst_median = worst_median.max(median(tail));
    }
    let fpr = detections as f64 / 20.0;
    let secs = start.elapsed().as_secs_f64();
    check(
        fpr <= 0.1 && worst_median < 0.0 && secs < 10.0,
        format!("FPR {fpr:.2}, largest per-seed median log BF {worst_median:.3}, {secs:.2} s"),
    )
}

fn drift_scenario(p: f64, ell: Horizon) -> ScenarioConfig {
    ScenarioConfig {
        total_windows: 600,
        t_s: 301,
        p,
        ell,
        repetitions: 20,
        seed: 2022,
        detector: DetectorConfig {
            window: Horizon::Finite(100),
            ..DetectorConfig::default()
        },
    }
}

fn disjoint_pools() -> logdrift::simulator::GeneratedPools {
    let gen = SyntheticPools {
        overlap: 0,
        ..SyntheticPools::default()
    };
    gen.generate(7).unwrap()
}

fn simulate(cfg: &ScenarioConfig) -> Vec<Repetition> {
    let pools = disjoint_pools();
    run_scenario(cfg, &pools.normal, &pools.anomalous).unwrap()
}

fn drift_detection() -> Outcome {
    let start = Instant::now();
    let cfg = drift_scenario(0.3, Horizon::Unbounded);
    let reps = simulate(&cfg);
    let ds: Vec<u64> = reps.iter().map(|r| r.d).collect();
    let m = evaluate(&ds, cfg.t_s, cfg.detector.grace).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let add = m.add.unwrap_or(f64::INFINITY);
    check(
        m.tpr == 1.0 && m.fnr == 0.0 && add < 100.0 && secs < 30.0,
        format!(
            "TPR {}, FPR {}, FNR {}, ADD {add:.1}, {secs:.2} s",
            m.tpr, m.fpr, m.fnr
        ),
    )
}

fn short_contamination() -> Outcome {
    let cfg = drift_scenario(0.3, Horizon::Finite(100));
    let c = cfg.detector.threshold();
    let t = cfg.t_s + 100 + 100;
    let reps = simulate(&cfg);
    let values: Vec<f64> = reps.iter().filter_map(|r| r.trace.at(t)).collect();
    let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check(
        values.len() == reps.len() && worst < c,
        format!("largest log BF at t = {t} is {worst:.3} (c = {c:.4})"),
    )
}

fn steady_state_mean(cfg: &ScenarioConfig) -> f64 {
    let from = cfg.t_s + cfg.detector.window.finite().unwrap();
    let values: Vec<f64> = simulate(cfg)
        .iter()
        .flat_map(|r| {
            r.trace
                .entries
                .iter()
                .filter(|e| e.t >= from)
                .map(|e| e.log_bf)
                .collect::<Vec<_>>()
        })
        .collect();
    values.iter().sum::<f64>() / values.len() as f64
}

fn dose_response() -> Outcome {
    let low = steady_state_mean(&drift_scenario(0.1, Horizon::Unbounded));
    let high = steady_state_mean(&drift_scenario(0.3, Horizon::Unbounded));
    check(
        high > low,
        format!("mean steady-state log BF {high:.3} at p = 0.3 vs {low:.3} at p = 0.1"),
    )
}

fn metrics_arithmetic() -> Outcome {
    let m = evaluate(&[0, 450, 520, 700], 501, 100).map_err(|e| e.to_string())?;
    check(
        m.fpr == 0.25 && m.tpr == 0.5 && m.fnr == 0.25 && m.add == Some(109.0),
        serde_json::to_string(&m).unwrap(),
    )
}

fn templater_totality() -> Outcome {
    const WORDS: &[&str] = &[
        "GET",
        "POST",
        "/api/v1",
        "user",
        "id=17",
        "id=42",
        "error",
        "timeout",
        "ok",
        "in",
        "at",
        "12:00:01",
        "2024-05-01T10:00:00Z",
        "1714557600",
        "failed",
        "<*>",
        "ms",
        "[object",
        "Object]",
    ];
    let pre = Preprocessor::default();
    let mut lines_checked = 0;
    for seed in 0..50u64 {
        let mut rng = repetition_rng(seed, 9);
        let n = rng.random_range(1..300);
        let mut ts = 0i64;
        let records: Vec<LogRecord> = (0..n)
            .map(|_| {
                ts += rng.random_range(0..4_000);
                let len = rng.random_range(1..9);
                let msg: Vec<&str> = (0..len)
                    .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                    .collect();
                LogRecord::new(ts, msg.join(" "))
            })
            .collect();
        let lines: Vec<String> = records
            .iter()
            .filter_map(|r| pre.preprocess(&r.message))
            .collect();
        let threshold = [0.3, 0.5, 0.8, 1.0][seed as usize % 4];
        let set = mine_templates(&lines, threshold).map_err(|e| e.to_string())?;
        let matcher = Matcher::new(&set);
        if let Some(l) = lines.iter().find(|l| matcher.match_line(l).is_unknown()) {
            return Err(format!("seed {seed}: {l:?} matched no template"));
        }
        let vectors =
            window_counts(records, &set, &pre, WindowSpec::default()).map_err(|e| e.to_string())?;
        check_training(&vectors, set.size()).map_err(|e| format!("seed {seed}: {e}"))?;
        let unknown: f64 = vectors
            .iter()
            .map(|v| {
                v.values()[Slot::UnknownError.offset(set.size())]
                    + v.values()[Slot::UnknownNormal.offset(set.size())]
            })
            .sum();
        if unknown != 0.0 {
            return Err(format!("seed {seed}: {unknown} unknown counts"));
        }
        lines_checked += lines.len();
    }
    Ok(format!(
        "50 corpora, {lines_checked} lines, zero unknown counts"
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_logdrift"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.json");
    let cfg = ScenarioConfig {
        total_windows: 400,
        t_s: 201,
        p: 0.1,
        ell: Horizon::Finite(150),
        repetitions: 12,
        seed: 5,
        ..ScenarioConfig::default()
    };
    std::fs::write(&scenario, serde_json::to_string(&cfg).unwrap()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let path = dir.path().join(name);
        let p = |x: &Path| x.to_str().unwrap().to_string();
        run_cli(&[
            "--quiet",
            "--seed",
            "99",
            "simulate",
            "--synthetic",
            "--scenario",
            &p(&scenario),
            "--output",
            &p(&path),
        ])?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let records =
        read_detections(&String::from_utf8_lossy(&outputs[0])).map_err(|e| e.to_string())?;
    check(
        outputs[0] == outputs[1] && records.len() == 12,
        format!(
            "{} bytes, {} detections, identical across runs",
            outputs[0].len(),
            records.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("lg oracle equivalence", lg_oracle),
        ("chi-squared backend", chi_squared_backend),
        ("window equivalence", window_equivalence),
        ("null stability", null_stability),
        ("drift detection", drift_detection),
        ("short-contamination recovery", short_contamination),
        ("dose response", dose_response),
        ("metrics arithmetic", metrics_arithmetic),
        ("templater totality", templater_totality),
        ("simulate determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
