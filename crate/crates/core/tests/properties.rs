use std::collections::BTreeMap;

use argtune_core::curation::{
    sample_instances, split_instances, split_sizes, water_fill, ALPACA,
};
use argtune_core::eval::{compile_automaton, decode, mase, mean_rank, Decoded, Metric, ModelScores, TaskScore};
use argtune_core::rng::substream;
use argtune_core::rouge::{lcs_length, rouge_l_f1, rouge_l_f1_tokens, tokenize};
use argtune_core::task::{
    canonical_label, dedupe_instances, Instance, Instruction, Provenance, Task, TaskId, TaskType,
};
use proptest::prelude::*;

/// Textbook O(n·m) LCS table.
fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

fn f1_oracle(a: &[String], b: &[String]) -> f64 {
    let l = lcs_oracle(a, b) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / a.len() as f64;
    let r = l / b.len() as f64;
    2.0 * p * r / (p + r)
}

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(String::from), 0..25)
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec!["The", "claim", "is", "WEAK", "weak,", "premise", "(pro)", "con.", "-", "über"]),
        0..15,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn lcs_matches_table(a in words(), b in words()) {
        prop_assert_eq!(lcs_length(&a, &b), lcs_oracle(&a, &b));
    }

    #[test]
    fn f1_matches_oracle(a in words(), b in words()) {
        let got = rouge_l_f1_tokens(&a, &b).value();
        prop_assert!((got - f1_oracle(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn rouge_symmetric_and_bounded(a in sentence(), b in sentence()) {
        let ab = rouge_l_f1(&a, &b).value();
        prop_assert_eq!(ab, rouge_l_f1(&b, &a).value());
        prop_assert!((0.0..=1.0).contains(&ab));
        let (ta, tb) = (tokenize(&a), tokenize(&b));
        prop_assert!(lcs_length(&ta, &tb) <= ta.len().min(tb.len()));
    }

    #[test]
    fn self_similarity_is_one(a in sentence()) {
        let expected = if tokenize(&a).is_empty() { 0.0 } else { 1.0 };
        prop_assert_eq!(rouge_l_f1(&a, &a).value(), expected);
    }

    #[test]
    fn dedupe_is_idempotent(pairs in prop::collection::vec((0u8..6, 0u8..3), 0..20)) {
        let inst: Vec<Instance> = pairs.iter().map(|(i, o)| Instance::new(format!("in{i}"), format!("out{o}"))).collect();
        let once = dedupe_instances(inst);
        prop_assert_eq!(dedupe_instances(once.clone()), once.clone());
        let mut inputs: Vec<&str> = once.iter().map(|i| i.input.as_str()).collect();
        inputs.sort();
        let n = inputs.len();
        inputs.dedup();
        prop_assert_eq!(inputs.len(), n);
    }

    #[test]
    fn task_json_round_trip(
        text in "[A-Za-z ,.]{1,40}",
        labels in prop::collection::btree_set("[a-z]{1,6}", 2..5),
        inputs in prop::collection::vec("[ -~]{0,20}", 1..6),
    ) {
        let labels: Vec<String> = labels.into_iter().collect();
        let task = Task {
            instruction: Instruction {
                id: TaskId::new("t"),
                text,
                provenance: Provenance::Seed,
                area: None,
                source_dataset: Some("d".into()),
            },
            instances: inputs.iter().enumerate().map(|(k, i)| Instance::new(i.clone(), labels[k % labels.len()].clone())).collect(),
            task_type: TaskType::Classification { labels },
        };
        let line = serde_json::to_string(&task).unwrap();
        let back: Task = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(&back, &task);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), line);
    }

    #[test]
    fn instance_split_is_partition(m in 1usize..200, seed in any::<u64>()) {
        let inst: Vec<Instance> = (0..m).map(|i| Instance::new(format!("{i}"), "o")).collect();
        let s = split_instances(&inst, [7, 1, 2], &mut substream(seed, "split"));
        let sizes = split_sizes(m, [7, 1, 2]);
        prop_assert_eq!([s.train.len(), s.val.len(), s.test.len()], sizes);
        let mut all: Vec<Instance> = s.train.into_iter().chain(s.val).chain(s.test).collect();
        all.sort();
        let mut orig = inst.clone();
        orig.sort();
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn water_fill_respects_caps(caps in prop::collection::vec(0usize..50, 1..8), total in 0usize..300) {
        let got = water_fill(&caps, total);
        prop_assert!(got.iter().zip(&caps).all(|(g, c)| g <= c));
        prop_assert_eq!(got.iter().sum::<usize>(), total.min(caps.iter().sum()));
        // Unsaturated slots differ by at most one.
        let open: Vec<usize> = got.iter().zip(&caps).filter(|(g, c)| g < c).map(|(g, _)| *g).collect();
        if let (Some(lo), Some(hi)) = (open.iter().min(), got.iter().max()) {
            prop_assert!(*hi <= lo + 1 || open.is_empty());
        }
    }

    #[test]
    fn balanced_labels(labels in 2usize..10, per in 1usize..40, seed in any::<u64>()) {
        let names: Vec<String> = (0..labels).map(|l| format!("l{l}")).collect();
        let inst: Vec<Instance> = (0..labels * per).map(|i| Instance::new(format!("{i}"), names[i % labels].clone())).collect();
        let tt = TaskType::Classification { labels: names.clone() };
        let got = sample_instances(&tt, &inst, 100, &mut substream(seed, "s")).unwrap();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for i in &got {
            *counts.entry(i.output.as_str()).or_default() += 1;
        }
        let max = counts.values().max().unwrap();
        let min = names.iter().map(|n| counts.get(n.as_str()).copied().unwrap_or(0)).min().unwrap();
        if labels * per >= 100 {
            prop_assert!(max - min <= 1);
        }
        prop_assert_eq!(got.len(), (labels * per).min(100));
    }

    #[test]
    fn record_offsets(instruction in "[^\u{0}]{1,30}", input in "[^\u{0}]{0,30}", output in "[^\u{0}]{1,30}") {
        let r = ALPACA.render_record(&instruction, &Instance::new(input, output.clone()), &TaskId::new("t"), "s");
        prop_assert!(r.offset_is_valid());
        prop_assert_eq!(r.output(&ALPACA), Some(output.as_str()));
    }

    #[test]
    fn decode_stays_in_language(
        raw in "[A-Za-z0-9 .,:;!?()+\\-]{0,40}",
        labels in prop::collection::btree_set("[a-zA-Z]{1,5}( [a-z]{1,4})?", 1..5),
    ) {
        let labels: Vec<String> = labels.into_iter().collect();
        let a = compile_automaton(&TaskType::Classification { labels: labels.clone() }).unwrap();
        let canon: Vec<String> = labels.iter().map(|l| canonical_label(l)).collect();
        if let Some(d) = decode(&raw, &a) {
            match d {
                Decoded::Label(l) => prop_assert!(canon.contains(&l)),
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }
        let r = compile_automaton(&TaskType::Regression { min: 1.0, max: 5.0 }).unwrap();
        if let Some(d) = decode(&raw, &r) {
            match d {
                Decoded::Number(x) => prop_assert!((1.0..=5.0).contains(&x)),
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }
    }

    #[test]
    fn mase_identities(gold in prop::collection::vec(-50.0f64..50.0, 2..40)) {
        prop_assume!(gold.iter().any(|g| (g - gold[0]).abs() > 1e-6));
        prop_assert_eq!(mase(&gold, &gold).unwrap(), 0.0);
        let mean = gold.iter().sum::<f64>() / gold.len() as f64;
        let baseline = vec![mean; gold.len()];
        prop_assert!((mase(&baseline, &gold).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_ranks_are_bounded_and_transform_invariant(
        table in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 2..5),
    ) {
        let build = |f: &dyn Fn(f64) -> f64| -> Vec<ModelScores> {
            table.iter().enumerate().map(|(m, row)| ModelScores {
                model: format!("m{m}"),
                scores: row.iter().enumerate().map(|(t, v)| (
                    TaskId::new(format!("t{t}")),
                    TaskScore { metric: Metric::MicroF1, value: f(*v), dataset: None },
                )).collect(),
            }).collect()
        };
        let plain = mean_rank(&build(&|v| v)).unwrap();
        let moved = mean_rank(&build(&|v| v * v * v + 2.0 * v + 7.0)).unwrap();
        let n = table.len() as f64;
        for (a, b) in plain.rows.iter().zip(&moved.rows) {
            prop_assert_eq!(&a.model, &b.model);
            prop_assert_eq!(a.mean_rank, b.mean_rank);
            prop_assert!(a.mean_rank >= 1.0 && a.mean_rank <= n);
        }
        let total: f64 = plain.rows.iter().map(|r| r.mean_rank).sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }
}
