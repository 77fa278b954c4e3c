use std::collections::{BTreeMap, BTreeSet};

use libsmith::cluster::ward::cluster_fixed_size;
use libsmith::cluster::{hhi, tag_entropy, TagProfile};
use libsmith::model::{Loss, TestOutcome};
use libsmith::scoring::{passes_gate, select_best, Selection};
use libsmith::stats::best_at_k::{best_at_k, SamplePoint};
use libsmith::stats::bradley_terry::{bradley_terry_fit, Comparison};
use libsmith::stats::report::pass_rate;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn points() -> impl Strategy<Value = Vec<SamplePoint>> {
    prop::collection::vec((0u8..6, -5i32..5, any::<bool>(), 0u8..3), 1..12).prop_map(|v| {
        v.into_iter()
            .map(|(s, val, feasible, d)| SamplePoint {
                score: f64::from(s),
                value: f64::from(val) / 2.0,
                feasible,
                digest: format!("d{d}"),
            })
            .collect()
    })
}

fn losses() -> impl Strategy<Value = Vec<(String, Option<f64>)>> {
    prop::collection::vec(("[a-c]{2}", prop::option::weighted(0.8, -100.0f64..100.0)), 0..10)
}

fn select(cands: &[(String, Option<f64>)], f: impl Fn(f64) -> f64) -> Selection {
    let input: Vec<(&str, Loss)> = cands
        .iter()
        .map(|(d, v)| (d.as_str(), v.map_or(Loss::Infeasible, |x| Loss::Finite(f(x)))))
        .collect();
    select_best(&input)
}

const TESTS: [&str; 4] = ["t0", "t1", "t2", "t3"];

fn outcomes(units: usize) -> impl Strategy<Value = BTreeMap<String, TestOutcome>> {
    prop::collection::vec(subsequence(TESTS.to_vec(), 0..=TESTS.len()), units).prop_map(|per_unit| {
        per_unit
            .into_iter()
            .enumerate()
            .map(|(i, passed)| {
                let id = format!("u{i}");
                let mut o = TestOutcome::empty(&id);
                for t in TESTS {
                    if passed.contains(&t) {
                        o.passed.insert(t.into());
                    } else {
                        o.failed.insert(t.into());
                    }
                }
                (id, o)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn best_at_k_ignores_sample_order(pts in points(), seed in any::<u64>()) {
        let mut shuffled = pts.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let feasible = pts.iter().filter(|p| p.feasible).count();
        for k in 1..=feasible {
            prop_assert_eq!(best_at_k(&pts, k).unwrap(), best_at_k(&shuffled, k).unwrap());
        }
    }

    #[test]
    fn best_at_k_lies_between_min_and_mean(pts in points()) {
        let values: Vec<f64> = pts.iter().filter(|p| p.feasible).map(|p| p.value).collect();
        prop_assume!(!values.is_empty());
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        prop_assert!((best_at_k(&pts, 1).unwrap() - mean).abs() < 1e-12);
        for k in 1..=values.len() {
            let t = best_at_k(&pts, k).unwrap();
            prop_assert!(t >= lo - 1e-12 && t <= hi + 1e-12);
        }
    }

    #[test]
    fn selection_is_invariant_to_affine_rescaling(cands in losses(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        prop_assert_eq!(select(&cands, |x| x), select(&cands, |x| x * scale + shift));
    }

    #[test]
    fn selection_is_feasible_and_minimal(cands in losses()) {
        match select(&cands, |x| x) {
            Selection::Chosen(i) => {
                let best = cands[i].1.unwrap();
                prop_assert!(cands.iter().filter_map(|c| c.1).all(|v| best <= v));
            }
            Selection::KeepOriginals => prop_assert!(cands.iter().all(|c| c.1.is_none())),
        }
    }

    #[test]
    fn gated_candidates_never_lower_the_pass_rate(original in outcomes(3), candidate in outcomes(3)) {
        let units: Vec<String> = original.keys().cloned().collect();
        if passes_gate(&original, &candidate, &units) {
            prop_assert!(pass_rate(&candidate) >= pass_rate(&original));
        }
        prop_assert!(passes_gate(&original, &original, &units));
    }

    #[test]
    fn entropy_is_bounded_and_scale_free(counts in prop::collection::vec(0u64..50, 0..12), factor in 1u64..20) {
        let profile = |f: u64| TagProfile {
            instances: counts.iter().enumerate().map(|(i, c)| (format!("t{i}"), c * f)).collect(),
            problems: vec![],
        };
        let h = tag_entropy(&profile(1));
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((h - tag_entropy(&profile(factor))).abs() < 1e-12);
    }

    #[test]
    fn hhi_is_within_its_range(problems in prop::collection::vec(prop::collection::btree_set("[a-e]", 1..4), 1..8)) {
        let distinct: BTreeSet<&String> = problems.iter().flatten().collect();
        let v = hhi(&TagProfile::from_problems(problems.clone())).unwrap();
        prop_assert!(v > 0.0 && v <= distinct.len() as f64 + 1e-12);
    }

    #[test]
    fn fixed_size_plans_ignore_input_order(
        coords in prop::collection::vec((-10i32..10, -10i32..10), 2..12),
        s in 1usize..5,
        rotate in 0usize..12,
    ) {
        prop_assume!(s <= coords.len());
        let units: Vec<(String, Vec<f64>)> = coords
            .iter()
            .enumerate()
            .map(|(i, (x, y))| (format!("u{i:02}"), vec![f64::from(*x), f64::from(*y)]))
            .collect();
        let mut reordered = units.clone();
        reordered.reverse();
        let r = rotate % reordered.len();
        reordered.rotate_left(r);
        let plan = cluster_fixed_size(&units, s).unwrap();
        prop_assert_eq!(&plan, &cluster_fixed_size(&reordered, s).unwrap());

        let mut seen: Vec<&String> = plan.clusters.iter().flatten().collect();
        seen.sort();
        let ids: Vec<&String> = units.iter().map(|u| &u.0).collect();
        prop_assert_eq!(seen, ids);
        let off_size = plan.clusters.iter().filter(|c| c.len() != s).count();
        prop_assert!(off_size <= 1);
    }

    #[test]
    fn bradley_terry_likelihood_never_decreases(wins in prop::collection::vec(1usize..6, 6)) {
        // Every ordered pair of three items has at least one win.
        let pairs = [("a", "b"), ("b", "a"), ("a", "c"), ("c", "a"), ("b", "c"), ("c", "b")];
        let games: Vec<Comparison> = pairs
            .iter()
            .zip(&wins)
            .flat_map(|((w, l), &n)| std::iter::repeat_with(|| Comparison::new(*w, *l)).take(n))
            .collect();
        let fit = bradley_terry_fit(&games, "a").unwrap();
        prop_assert!(fit.converged);
        for w in fit.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
        prop_assert_eq!(fit.strengths["a"], 1.0);
    }
}
