use logdrift::detector::{build_prior, lg, run, DetectorConfig, Horizon};
use logdrift::simulator::{repetition_rng, sample_multinomial};
use logdrift::{CountVector, DirichletState, ProbabilityVector};
use proptest::prelude::*;
use rand::Rng;

/// Direct evaluation of the windowed log Bayes factor at every step: rebuild
/// the window and its cumulative sums from scratch and call `lg` on
/// materialized vectors.
fn naive_trace(prior: &[f64], cs: &[Vec<f64>], w: Option<usize>, kappa: f64, b0: f64) -> Vec<f64> {
    let total: f64 = prior.iter().sum();
    let theta: Vec<f64> = prior.iter().map(|a| a / total).collect();
    let scaled: Vec<Vec<f64>> = cs
        .iter()
        .map(|c| {
            let s: f64 = c.iter().sum();
            c.iter().map(|v| kappa * v / s).collect()
        })
        .collect();
    (0..scaled.len())
        .map(|t| {
            let start = w.map_or(0, |w| (t + 1).saturating_sub(w));
            let mut cum = prior.to_vec();
            let mut bf = b0;
            for x in &scaled[start..=t] {
                let next: Vec<f64> = cum.iter().zip(x).map(|(a, b)| a + b).collect();
                let null: f64 = x.iter().zip(&theta).map(|(x, p)| x * p.ln()).sum();
                bf += lg(&next).unwrap() - lg(&cum).unwrap() - null;
                cum = next;
            }
            bf
        })
        .collect()
}

fn vectors(rows: &[Vec<f64>]) -> Vec<CountVector> {
    rows.iter()
        .map(|r| CountVector::new(r.clone(), 0).unwrap())
        .collect()
}

fn random_stream(seed: u64, len: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = repetition_rng(seed, 0);
    let probs: Vec<f64> = {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    (0..len)
        .map(|_| sample_multinomial(&probs, 50, &mut rng))
        .collect()
}

fn config(window: Horizon) -> DetectorConfig {
    DetectorConfig {
        window,
        grace: 0,
        ..DetectorConfig::default()
    }
}

fn prior_for(dim: usize) -> DirichletState {
    let raw: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64).collect();
    let s: f64 = raw.iter().sum();
    let p = ProbabilityVector::new(raw.iter().map(|x| x / s).collect()).unwrap();
    build_prior(&p, 20.0, 1e-6).unwrap()
}

#[test]
fn matches_naive_windowed_formula() {
    let prior = prior_for(6);
    for (w, horizon) in [
        (Some(3), Horizon::Finite(3)),
        (Some(10), Horizon::Finite(10)),
        (None, Horizon::Unbounded),
    ] {
        for kappa in [1.0, 7.5] {
            let rows = random_stream(w.unwrap_or(0) as u64, 40, 6);
            let cfg = DetectorConfig {
                kappa_count: kappa,
                b0: -0.25,
                ..config(horizon)
            };
            let got = run(&prior, &vectors(&rows), &cfg).unwrap().log_bf();
            let want = naive_trace(prior.alpha(), &rows, w, kappa, -0.25);
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() <= 1e-9 * e.abs().max(1.0), "{g} vs {e}");
            }
        }
    }
}

#[test]
fn large_window_equals_unbounded() {
    let prior = prior_for(8);
    for seed in 0..20 {
        let cs = vectors(&random_stream(100 + seed, 80, 8));
        let unbounded = run(&prior, &cs, &config(Horizon::Unbounded)).unwrap();
        for w in [80, 200] {
            let windowed = run(&prior, &cs, &config(Horizon::Finite(w))).unwrap();
            for (a, b) in windowed.entries.iter().zip(&unbounded.entries) {
                assert_eq!(a.t, b.t);
                assert!((a.log_bf - b.log_bf).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn window_forgets_older_inputs() {
    let prior = prior_for(5);
    let w = 12usize;
    let suffix = random_stream(7, 40, 5);
    let cfg = config(Horizon::Finite(w as u64));
    let mut traces = Vec::new();
    for (junk_seed, junk_len) in [(1u64, w), (2, w + 5), (3, 3 * w)] {
        let mut rows: Vec<Vec<f64>> = random_stream(junk_seed, junk_len, 5)
            .into_iter()
            .map(|mut r| {
                // skew the junk toward one slot
                r[0] += 500.0;
                r
            })
            .collect();
        rows.extend(suffix.iter().cloned());
        let trace = run(&prior, &vectors(&rows), &cfg).unwrap().log_bf();
        traces.push(trace[junk_len..].to_vec());
    }
    let alone = run(&prior, &vectors(&suffix), &cfg).unwrap().log_bf();
    for trace in &traces {
        // once the window lies inside the suffix, history no longer matters
        for s in (w - 1)..suffix.len() {
            assert!((trace[s] - alone[s]).abs() <= 1e-10);
        }
    }
}

#[test]
fn drifted_mass_raises_evidence() {
    let probs = [0.4, 0.3, 0.3, 0.0];
    let p = ProbabilityVector::new(probs.to_vec()).unwrap();
    for kappa_prior in [1.0, 10.0, 100.0] {
        let prior = build_prior(&p, kappa_prior, 1e-6).unwrap();
        let theta = prior.mean();
        for w in [2u64, 5, 20] {
            let cfg = config(Horizon::Finite(w));
            let steady = vec![CountVector::new(theta.probs().to_vec(), 0).unwrap(); 30];
            let drifted = vec![CountVector::new(vec![0.0, 0.0, 0.0, 1.0], 0).unwrap(); 30];
            let a = run(&prior, &steady, &cfg).unwrap();
            let b = run(&prior, &drifted, &cfg).unwrap();
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert!(x.log_bf <= y.log_bf);
            }
        }
    }
}

#[test]
fn prior_proportional_stream_never_flags() {
    let p = ProbabilityVector::new(vec![0.5, 0.25, 0.125, 0.125, 0.0, 0.0]).unwrap();
    let prior = build_prior(&p, 100.0, 1e-6).unwrap();
    let cs = vec![CountVector::new(vec![8.0, 4.0, 2.0, 2.0, 0.0, 0.0], 0).unwrap(); 50];
    let trace = run(&prior, &cs, &config(Horizon::Finite(100))).unwrap();
    assert!(trace.entries.iter().all(|e| !e.flagged && e.log_bf < 3.0));
}

#[test]
fn null_stream_drifts_below_zero() {
    let mut rng = repetition_rng(42, 0);
    let probs = [0.3, 0.2, 0.2, 0.15, 0.15, 0.0, 0.0];
    let p = ProbabilityVector::new(probs.to_vec()).unwrap();
    let prior = build_prior(&p, 100.0, 1e-6).unwrap();
    let cs: Vec<_> = (0..200)
        .map(|_| CountVector::new(sample_multinomial(&probs, 200, &mut rng), 0).unwrap())
        .collect();
    let trace = run(&prior, &cs, &config(Horizon::Finite(100))).unwrap();
    assert!(trace.entries[99..].iter().all(|e| e.log_bf < 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_are_bitwise_deterministic(seed in any::<u64>(), w in 2u64..30) {
        let prior = prior_for(4);
        let cs = vectors(&random_stream(seed, 60, 4));
        let cfg = config(Horizon::Finite(w));
        let a = run(&prior, &cs, &cfg).unwrap();
        let b = run(&prior, &cs, &cfg).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            prop_assert_eq!(x.log_bf.to_bits(), y.log_bf.to_bits());
        }
    }

    #[test]
    fn flag_iff_above_threshold_after_grace(seed in any::<u64>(), grace in 0u64..40, alpha in 0.001f64..1.0) {
        let prior = prior_for(4);
        let mut rows = random_stream(seed, 60, 4);
        for r in rows.iter_mut().skip(20) {
            r[0] = 0.0;
            r[1] = 0.0;
        }
        let cfg = DetectorConfig { grace, alpha, ..config(Horizon::Finite(10)) };
        let trace = run(&prior, &vectors(&rows), &cfg).unwrap();
        let c = (1.0 / alpha).ln();
        let mut last_t = 0;
        for e in &trace.entries {
            prop_assert!(e.t > last_t);
            last_t = e.t;
            prop_assert_eq!(e.flagged, e.log_bf > c && e.t >= grace);
        }
    }
}
