//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use libsmith::cli::{run_cli, EXIT_OK};
use libsmith::cluster::{hhi, tag_entropy, TagProfile};
use libsmith::code::{self, default_grammar, usage_stats};
use libsmith::gateway::Gateway;
use libsmith::model::{Loss, MetricId, Task, TestOutcome};
use libsmith::pipeline::rundir::read_run;
use libsmith::pipeline::{run, Engine, Mode, SampleStatus};
use libsmith::scoring::{gated_loss, select_best, Metrics, Scorer, Selection};
use libsmith::stats::best_at_k::{best_at_k, SamplePoint};
use libsmith::stats::bradley_terry::{bradley_terry_fit, Comparison};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within(limit: Duration, started: Instant) {
    let elapsed = started.elapsed();
    assert!(elapsed < limit, "took {elapsed:?}, limit {limit:?}");
}

fn cli(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(std::iter::once("libsmith").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

fn refactor(out: &Path, sampler: &str) {
    let task = common::fixture("tasks/six_unit");
    let args = ["refactor", task.to_str().unwrap(), "--out", out.to_str().unwrap(), "-k", "4", "--seed", "7", "--sampler", sampler];
    let (code, err) = cli(&args);
    assert_eq!(code, EXIT_OK, "{err}");
}

fn planted_sampler() -> String {
    format!("stub:fixture:{}", common::fixture("tasks/six_unit/planted").display())
}

fn random_outcome(rng: &mut ChaCha8Rng, unit: &str, tests: &[&str]) -> TestOutcome {
    let mut o = TestOutcome::empty(unit);
    for t in tests {
        if rng.gen_bool(0.7) {
            o.passed.insert(t.to_string());
        } else {
            o.failed.insert(t.to_string());
        }
    }
    o
}

fn gate_soundness() {
    let started = Instant::now();
    let tests = ["t0", "t1", "t2", "t3", "t4"];
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("u{i}.py")).collect();
        let original: BTreeMap<String, TestOutcome> =
            units.iter().map(|u| (u.clone(), random_outcome(&mut rng, u, &tests))).collect();
        let metric = MetricId::ALL[rng.gen_range(0..MetricId::ALL.len())];
        let mut candidates = Vec::new();
        for _ in 0..rng.gen_range(1..=6) {
            let mut outcomes: BTreeMap<String, TestOutcome> = units
                .iter()
                .map(|u| {
                    // Start from the original and perturb, so that both sides of the gate occur.
                    let mut o = original[u].clone();
                    if rng.gen_bool(0.3) {
                        o = random_outcome(&mut rng, u, &tests);
                    }
                    (u.clone(), o)
                })
                .collect();
            if rng.gen_bool(0.05) {
                outcomes.remove(&units[0]);
            }
            let metrics = Metrics {
                tokens: rng.gen_range(1..50),
                mdl_nats: if rng.gen_bool(0.05) { f64::NAN } else { rng.gen_range(1.0..50.0) },
                cc: rng.gen_range(1..10),
                mi_neg: -rng.gen_range(0.0..100.0),
            };
            let digest = format!("{:02x}", rng.gen_range(0..8u8));
            candidates.push((digest, outcomes, metrics));
        }
        let losses: Vec<Loss> = candidates
            .iter()
            .map(|(_, o, m)| gated_loss(Some(m), metric, &original, o, &units))
            .collect();
        let input: Vec<(&str, Loss)> = candidates.iter().zip(&losses).map(|((d, _, _), l)| (d.as_str(), *l)).collect();

        // Independent gate: every test the original passed is passed again.
        let admissible = |(_, outcomes, metrics): &(String, BTreeMap<String, TestOutcome>, Metrics)| {
            metrics.get(metric).is_finite()
                && units.iter().all(|u| {
                    outcomes
                        .get(u)
                        .is_some_and(|c| original[u].passed.iter().all(|t| c.passed.contains(t)))
                })
        };
        match select_best(&input) {
            Selection::Chosen(i) => {
                assert!(admissible(&candidates[i]), "seed {seed}: chose a candidate that loses a passing test");
                let best = candidates[i].2.get(metric);
                for c in candidates.iter().filter(|c| admissible(c)) {
                    assert!(best <= c.2.get(metric), "seed {seed}: not the minimum");
                }
            }
            Selection::KeepOriginals => {
                assert!(!candidates.iter().any(admissible), "seed {seed}: an admissible candidate was ignored");
            }
        }
    }
    within(Duration::from_secs(5), started);
}

/// Mean over all k-subsets of the value of the subset's lowest-score point
/// (ties by value).
fn brute_force(points: &[(f64, f64)], k: usize) -> f64 {
    let n = points.len();
    let (mut sum, mut count) = (0.0, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut best: Option<(f64, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if mask & (1 << i) != 0 && best.is_none_or(|b| p.0 < b.0 || (p.0 == b.0 && p.1 < b.1)) {
                best = Some(*p);
            }
        }
        sum += best.unwrap().1;
        count += 1;
    }
    sum / count as f64
}

fn best_at_k_unbiased() {
    let started = Instant::now();
    for n in 1..=8usize {
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + n as u64);
            // Few distinct scores so ties are common.
            let points: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0..4) as f64, rng.gen_range(-1.0..1.0))).collect();
            let mut samples: Vec<SamplePoint> = points.iter().map(|&(s, v)| SamplePoint::new(s, v)).collect();
            // Infeasible points must not count toward n.
            let mut dropped = SamplePoint::new(-10.0, 99.0);
            dropped.feasible = false;
            samples.insert(rng.gen_range(0..=n), dropped);
            for k in 1..=n {
                let got = best_at_k(&samples, k).unwrap();
                let want = brute_force(&points, k);
                assert!((got - want).abs() <= 1e-12, "n={n} k={k} seed={seed}: {got} vs {want}");
            }
        }
    }
    within(Duration::from_secs(10), started);
}

fn best_at_k_monotone() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<SamplePoint> = (0..50)
            .map(|_| {
                let s = rng.gen_range(0.0..10.0);
                SamplePoint::new(s, s)
            })
            .collect();
        let curve: Vec<f64> = (1..=50).map(|k| best_at_k(&samples, k).unwrap()).collect();
        for (k, w) in curve.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-12, "seed {seed}: θ at k={} is {} > {}", k + 2, w[1], w[0]);
        }
    }
}

fn cc_matches_cfg_oracle() {
    let mut functions = 0;
    for rel in ["code/cc_cases.py", "code/dijkstra.py", "code/halstead/matrix.py", "code/halstead/text_stats.py"] {
        let src = common::read_fixture(rel);
        let summary = code::parse(&src).unwrap();
        let graph = common::cfg::build(&src);
        let ours: BTreeMap<(String, usize), i64> = summary
            .functions
            .iter()
            .map(|f| ((f.name.clone(), f.span.start), 1 + i64::from(f.decision_points)))
            .collect();
        let oracle: BTreeMap<(String, usize), i64> =
            graph.functions.iter().map(|c| ((c.name.clone(), c.start_line), c.complexity())).collect();
        assert_eq!(ours, oracle, "{rel}");
        functions += ours.len();
    }
    assert!(functions >= 20, "only {functions} functions");
    let cases = common::read_fixture("code/cc_cases.py");
    for construct in ["while ", "for ", " and ", " or ", "except ", " if x > 0 else "] {
        assert!(cases.contains(construct), "fixture lacks {construct:?}");
    }
}

fn obfuscation_divergence() {
    let task = Task::load(&common::fixture("tasks/obfuscation")).unwrap();
    let mut config = common::stub_config("obfuscation", "identity", 1).gateway;
    config.scorer_endpoint = "stub:vocab-aware".into();
    let gateway = Gateway::offline(config).unwrap();
    let scorer = Scorer::new(&gateway, default_grammar());
    let readable: BTreeMap<String, String> = task.units.iter().map(|u| (u.id.clone(), u.code.clone())).collect();
    let obfuscated: BTreeMap<String, String> = readable
        .keys()
        .map(|id| (id.clone(), common::read_fixture(&format!("candidates/obfuscated/rewritten/{id}"))))
        .collect();
    let before = scorer.metrics("", &readable).unwrap();
    let after = scorer.metrics("", &obfuscated).unwrap();
    assert!(after.tokens < before.tokens, "tokens {} -> {}", before.tokens, after.tokens);
    assert!(after.mdl_nats > before.mdl_nats, "mdl {} -> {}", before.mdl_nats, after.mdl_nats);
}

fn profile(sets: &[&[&str]]) -> TagProfile {
    TagProfile::from_problems(sets.iter().map(|s| s.iter().map(|t| t.to_string()).collect()).collect())
}

fn coherence_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10_000 {
        let instances: BTreeMap<String, u64> =
            (0..rng.gen_range(0..12)).map(|t| (format!("t{t}"), rng.gen_range(0..20))).collect();
        let h = tag_entropy(&TagProfile { instances, problems: vec![] });
        assert!((0.0..=1.0).contains(&h), "H_N = {h}");
    }
    assert_eq!(tag_entropy(&profile(&[&["dp"], &["dp"], &["dp"]])), 0.0);
    assert_eq!(tag_entropy(&profile(&[&["a", "b"], &["c", "d"]])), 1.0);
    assert_eq!(hhi(&profile(&[&["a"], &["b"]])).unwrap(), 0.5);
    assert_eq!(hhi(&profile(&[&["a", "b"], &["a", "b"]])).unwrap(), 2.0);

    // 24 problems with one of 8 primary tags each and an occasional extra tag.
    let (mut pure, mut random) = ((0.0, 0.0), (0.0, 0.0));
    let mut groups = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problems: Vec<BTreeSet<String>> = (0..24)
            .map(|i| {
                let mut tags = BTreeSet::from([format!("tag{}", i / 3)]);
                if rng.gen_bool(0.3) {
                    tags.insert(format!("tag{}", rng.gen_range(0..8)));
                }
                tags
            })
            .collect();
        let mut shuffled = problems.clone();
        shuffled.shuffle(&mut rng);
        for (acc, grouping) in [(&mut pure, &problems), (&mut random, &shuffled)] {
            for chunk in grouping.chunks(3) {
                let p = TagProfile::from_problems(chunk.to_vec());
                acc.0 += tag_entropy(&p);
                acc.1 += hhi(&p).unwrap();
            }
        }
        groups += 8.0;
    }
    let (pure_h, random_h) = (pure.0 / groups, random.0 / groups);
    let (pure_hhi, random_hhi) = (pure.1 / groups, random.1 / groups);
    assert!(pure_h < random_h, "mean H_N pure {pure_h} vs random {random_h}");
    assert!(pure_hhi > random_hhi, "mean HHI pure {pure_hhi} vs random {random_hhi}");
}

fn end_to_end_determinism() {
    let started = Instant::now();
    let (a, b, id) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    refactor(a.path(), &planted_sampler());
    refactor(b.path(), &planted_sampler());
    assert_eq!(common::dir_snapshot(a.path()), common::dir_snapshot(b.path()), "runs differ");

    let out = read_run(a.path()).unwrap();
    for (unit, planted) in [("a_scores.py", 1), ("b_words.py", 1)] {
        let c = out.clusters.iter().find(|c| c.units.contains(&unit.to_string())).unwrap();
        assert_eq!(c.selection, Selection::Chosen(planted), "cluster of {unit}");
    }

    refactor(id.path(), "stub:identity");
    let report: serde_json::Value = serde_json::from_str(&read_path(&id.path().join("report.json"))).unwrap();
    assert_eq!(report["table"]["MDL Ratio"], 1.0);
    assert_eq!(report["table"]["Token Ratio"], 1.0);
    within(Duration::from_secs(60), started);
}

fn read_path(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn incremental_semantics() {
    let task = common::load_task("incremental");
    let mut cfg = common::stub_config("incremental", "fixture", 2);
    cfg.mode = Mode::Incremental;
    let out = run(&Engine::new(cfg).unwrap(), &task).unwrap();
    assert!(out.revisions[0].is_empty(), "initial library is not empty");
    for w in out.revisions.windows(2) {
        let (prev, next): (BTreeSet<_>, BTreeSet<_>) = (w[0].iter().collect(), w[1].iter().collect());
        assert!(prev.is_subset(&next), "{:?} not within {:?}", w[0], w[1]);
    }
    let second = &out.clusters[1];
    assert!(second.units.iter().all(|u| u.starts_with("c_")));
    assert!(second.retrieved.contains(&"mean".to_string()));
    assert!(second.samples.iter().any(|s| matches!(&s.status, SampleStatus::Redefines(_))));
    assert!(matches!(second.selection, Selection::Chosen(_)));
    assert!(!second.delta.contains("def mean("), "cluster 2 redefined mean");
    assert_eq!(out.library.definitions().filter(|e| e.name == "mean").count(), 1);
    for u in &second.units {
        let code = &out.rewritten[u];
        let imports = code.lines().any(|l| l.starts_with("from codebank import") && l.split([' ', ',']).any(|w| w == "mean"));
        assert!(imports, "{u} does not import mean");
        assert!(!code.contains("def mean("), "{u} still defines mean");
    }
}

fn bradley_terry() {
    let mut games = vec![Comparison::new("a", "b"); 3];
    games.push(Comparison::new("b", "a"));
    let fit = bradley_terry_fit(&games, "b").unwrap();
    let ratio = fit.strengths["a"] / fit.strengths["b"];
    assert!((ratio - 3.0).abs() < 1e-6, "ratio {ratio}");

    let pi = [("x", 2.0), ("y", 1.5), ("z", 1.0)];
    let mut recovered = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut games = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                let (a, b) = (pi[i], pi[j]);
                for _ in 0..500 {
                    if rng.gen_bool(a.1 / (a.1 + b.1)) {
                        games.push(Comparison::new(a.0, b.0));
                    } else {
                        games.push(Comparison::new(b.0, a.0));
                    }
                }
            }
        }
        let s = bradley_terry_fit(&games, "z").unwrap().strengths;
        if s["x"] > s["y"] && s["y"] > s["z"] {
            recovered += 1;
        }
    }
    assert!(recovered >= 95, "ordering recovered in {recovered}/100 seeds");
}

fn usage_and_report_names() {
    let counts: serde_json::Value = serde_json::from_str(&common::read_fixture("usage/counts.json")).unwrap();
    let library = common::read_fixture("usage/codebank.py");
    let programs = [common::read_fixture("usage/a.py"), common::read_fixture("usage/b.py")];
    let stats = usage_stats(default_grammar().as_ref(), &library, &programs).unwrap();
    let want: BTreeMap<String, u64> = serde_json::from_value(counts["calls_per_definition"].clone()).unwrap();
    assert_eq!(stats.calls_per_definition, want);
    let n = counts["num_definitions"].as_u64().unwrap() as f64;
    assert_eq!(stats.num_definitions as f64, n);
    assert_eq!(stats.avg_calls, counts["total_calls"].as_f64().unwrap() / n);
    assert_eq!(stats.single_use_fraction, counts["single_use"].as_f64().unwrap() / n);
    assert_eq!(stats.unused_count as u64, counts["unused"].as_u64().unwrap());

    let dir = tempfile::tempdir().unwrap();
    refactor(dir.path(), &planted_sampler());
    let text = read_path(&dir.path().join("report.json"));
    for name in [
        "Pass Rate",
        "Pass Rate Improvement",
        "MDL Ratio",
        "Token Ratio",
        "Library Functions",
        "Avg Calls per Function",
        "% Single Use Functions",
    ] {
        assert!(text.contains(&format!("\"{name}\":")), "report.json lacks {name:?}");
    }
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("gate soundness (1000 fuzzed pairs, < 5 s)", gate_soundness),
        ("best@k unbiasedness (n <= 8, 200 populations, 1e-12, < 10 s)", best_at_k_unbiased),
        ("best@k monotonicity (n = 50, 100 populations)", best_at_k_monotone),
        ("cyclomatic complexity equals CFG oracle (>= 20 functions)", cc_matches_cfg_oracle),
        ("obfuscation lowers tokens and raises MDL", obfuscation_divergence),
        ("coherence measures (bounds, exact cases, tag-pure vs random)", coherence_measures),
        ("end-to-end determinism and identity ratios (< 60 s)", end_to_end_determinism),
        ("incremental library growth and reuse", incremental_semantics),
        ("Bradley-Terry ratio and ordering recovery", bradley_terry),
        ("usage statistics and report field names", usage_and_report_names),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(()) => println!("PASS  {name}  [{:.2?}]", started.elapsed()),
            Err(payload) => {
                failures += 1;
                let msg = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
