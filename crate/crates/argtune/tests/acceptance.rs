mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use argtune::backend::{prompt_hash, FixtureRecord};
use argtune::io::{read_tasks, to_jsonl, write_jsonl};
use argtune_core::curation::{
    assemble_mixture, mixture_quotas, regression_bin, render_records,
    reserve_test_tasks, sample_instances, split_instances, MixtureSpec, SourceSpec, SplitSpec,
    ALPACA, REGRESSION_BINS,
};
use argtune_core::eval::{
    compile_automaton, decode, eval_prompt, mase, mean_rank, micro_f1, Decoded, Metric,
    ModelScores, PredictionRecord, TaskScore,
};
use argtune_core::rng::substream;
use argtune_core::rouge::{rouge_l_f1_tokens, tokenize};
use argtune_core::task::{canonical_label, Instance, Instruction, Provenance, Task, TaskId, TaskType};
use common::{read, run, seed_registry, workspace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

// Independent oracles.

fn lcs_table(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t[a.len()][b.len()]
}

fn f1_oracle(a: &[String], b: &[String]) -> f64 {
    let l = lcs_table(a, b) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, r) = (l / a.len() as f64, l / b.len() as f64);
    2.0 * p * r / (p + r)
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// Criteria.

fn c1_rouge_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    for _ in 0..1000 {
        let mut draw = || -> Vec<String> {
            let n = rng.gen_range(0..=40);
            (0..n).map(|_| vocab.choose(&mut rng).unwrap().clone()).collect()
        };
        let (a, b) = (draw(), draw());
        let got = rouge_l_f1_tokens(&a, &b).value();
        assert_eq!(round12(got), round12(f1_oracle(&a, &b)), "{a:?} vs {b:?}");
    }
    assert!(t0.elapsed() < Duration::from_secs(5));
}

fn c2_novelty_guarantee() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace(dir.path(), 35, "");
    let r = run(&["--config", s(&cfg), "generate", "--target-count", "100"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let pool = read_tasks(&dir.path().join("out/tasks.jsonl")).unwrap();
    let toks: Vec<Vec<String>> = pool.iter().map(|t| tokenize(&t.instruction.text)).collect();
    let mut generated = 0;
    for (p, t) in pool.iter().enumerate() {
        if !t.is_generated() {
            continue;
        }
        generated += 1;
        let worst = (0..p).map(|q| f1_oracle(&toks[p], &toks[q])).fold(0.0, f64::max);
        assert!(worst < 0.7, "{} reaches {worst}", t.id());
    }
    assert_eq!(generated, 100);
    assert!(t0.elapsed() < Duration::from_secs(30));
}

fn c3_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace(dir.path(), 35, "");
    let fx = dir.path().join("fx.jsonl");
    let r = run(&["--config", s(&cfg), "generate", "--target-count", "60", "--record-fixtures", s(&fx)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let r = run(&["--config", s(&cfg), "--output-dir", s(&out), "--mock-fixtures", s(&fx), "generate", "--target-count", "60"]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        outputs.push((read(&out.join("tasks.jsonl")), read(&out.join("run_log.jsonl"))));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].0, read(&dir.path().join("out/tasks.jsonl")));
}

fn c4_split_arithmetic() {
    let registry = seed_registry(35);
    assert_eq!(registry.len(), 105);
    let res = reserve_test_tasks(&registry, &SplitSpec::default(), None, &mut substream(9, "split")).unwrap();
    assert_eq!(res.test_tasks.len(), 21);
    let mut per_area: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &res.test_tasks {
        *per_area.entry(t.instruction.area.unwrap().as_str()).or_default() += 1;
    }
    assert_eq!(per_area.values().copied().collect::<Vec<_>>(), vec![7, 7, 7]);
    let inst: Vec<Instance> = (0..100).map(|i| Instance::new(format!("{i}"), "x")).collect();
    let sp = split_instances(&inst, [7, 1, 2], &mut substream(9, "s"));
    assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), (70, 10, 20));
}

fn c5_balanced_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 2..=10 {
        let labels: Vec<String> = (0..k).map(|l| format!("Label{l}")).collect();
        // Skewed pool with every label still able to fill its share.
        let mut inst = Vec::new();
        for (l, name) in labels.iter().enumerate() {
            for j in 0..(100 / k + 1 + 15 * l) {
                inst.push(Instance::new(format!("{l}-{j}"), name.clone()));
            }
        }
        let got = sample_instances(&TaskType::Classification { labels: labels.clone() }, &inst, 100, &mut rng).unwrap();
        assert_eq!(got.len(), 100);
        let mut counts: BTreeMap<&str, usize> = labels.iter().map(|l| (l.as_str(), 0)).collect();
        for i in &got {
            *counts.get_mut(i.output.as_str()).unwrap() += 1;
        }
        let (lo, hi) = (counts.values().min().unwrap(), counts.values().max().unwrap());
        assert!(hi - lo <= 1, "{k} labels: {counts:?}");
    }
    for (min, max) in [(1.0, 5.0), (0.0, 1.0), (-3.0, 3.0), (1.0, 7.0)] {
        let mut inst = Vec::new();
        for j in 0..400 {
            // Heavily concentrated near the bottom, sparse elsewhere.
            let u: f64 = rng.gen();
            let v = min + (max - min) * u.powi(4);
            inst.push(Instance::new(format!("{j}"), format!("{v}")));
        }
        let tt = TaskType::Regression { min, max };
        let got = sample_instances(&tt, &inst, 100, &mut rng).unwrap();
        let bin = |i: &Instance| regression_bin(i.output.parse().unwrap(), min, max);
        let mut have = [false; REGRESSION_BINS];
        for i in &inst {
            have[bin(i)] = true;
        }
        let mut hit = [false; REGRESSION_BINS];
        for i in &got {
            hit[bin(i)] = true;
        }
        assert_eq!(have, hit, "range [{min}, {max}]");
    }
}

fn c6_metric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let n = rng.gen_range(2..60);
        let mut gold: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        if gold.iter().all(|g| *g == gold[0]) {
            gold[0] += 1.0;
        }
        assert_eq!(mase(&gold, &gold).unwrap(), 0.0);
        let mean = gold.iter().sum::<f64>() / n as f64;
        let m = mase(&vec![mean; n], &gold).unwrap();
        assert!((m - 1.0).abs() <= 1e-12, "{m}");
    }
    for case in 0..100 {
        let k = rng.gen_range(2..6);
        let n = rng.gen_range(1..80);
        let gold: Vec<String> = (0..n).map(|_| format!("l{}", rng.gen_range(0..k))).collect();
        let records: Vec<PredictionRecord> = (0..n)
            .map(|i| {
                let decoded = match rng.gen_range(0..5) {
                    0 => None,
                    1 | 2 => Some(Decoded::Label(gold[i].clone())),
                    _ => Some(Decoded::Label(format!("l{}", rng.gen_range(0..k)))),
                };
                PredictionRecord {
                    task_id: TaskId::new("t"),
                    instance_index: i,
                    raw_output: String::new(),
                    decode_failed: decoded.is_none(),
                    decoded,
                }
            })
            .collect();
        let correct = records
            .iter()
            .zip(&gold)
            .filter(|(r, g)| r.decoded.as_ref().and_then(Decoded::as_label) == Some(g.as_str()))
            .count();
        let accuracy = correct as f64 / n as f64;
        assert!((micro_f1(&records, &gold).unwrap() - accuracy).abs() <= 1e-12, "case {case}");
    }
}

fn scores(model: &str, rows: &[(&str, Metric, f64, &str)]) -> ModelScores {
    ModelScores {
        model: model.into(),
        scores: rows
            .iter()
            .map(|(t, m, v, d)| (TaskId::new(*t), TaskScore { metric: *m, value: *v, dataset: Some((*d).into()) }))
            .collect(),
    }
}

fn c7_mean_rank() {
    // t1, t2 from dataset d1, t3 from d2. A wins t1 and t2, ties on t3.
    // Per-task ranks: A 1, 1, 1.5; B 2, 2, 1.5.
    // Per dataset: A (1 + 1.5) / 2 = 1.25, B (2 + 1.5) / 2 = 1.75.
    let a = scores("A", &[("t1", Metric::MicroF1, 0.8, "d1"), ("t2", Metric::Mase, 0.9, "d1"), ("t3", Metric::RougeL, 0.3, "d2")]);
    let b = scores("B", &[("t1", Metric::MicroF1, 0.6, "d1"), ("t2", Metric::Mase, 1.4, "d1"), ("t3", Metric::RougeL, 0.3, "d2")]);
    let board = mean_rank(&[a, b]).unwrap();
    let by_ds: Vec<(String, f64)> = board.rows.iter().map(|r| (r.model.clone(), r.mean_rank_by_dataset)).collect();
    assert_eq!(by_ds, vec![("A".to_string(), 1.25), ("B".to_string(), 1.75)]);
    let per_task: Vec<f64> = board.rows.iter().map(|r| r.mean_rank).collect();
    assert!((per_task[0] - 7.0 / 6.0).abs() < 1e-12 && (per_task[1] - 11.0 / 6.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let metrics = [Metric::MicroF1, Metric::Mase, Metric::RougeL];
    for _ in 0..50 {
        let models = rng.gen_range(2..6);
        let tasks = rng.gen_range(1..8);
        // Coarse values so ties occur.
        let table: Vec<Vec<f64>> = (0..models).map(|_| (0..tasks).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect()).collect();
        let build = |f: &dyn Fn(f64) -> f64| -> Vec<ModelScores> {
            (0..models)
                .map(|m| ModelScores {
                    model: format!("m{m}"),
                    scores: (0..tasks)
                        .map(|t| (TaskId::new(format!("t{t}")), TaskScore { metric: metrics[t % 3], value: f(table[m][t]), dataset: Some(format!("d{}", t / 2)) }))
                        .collect(),
                })
                .collect()
        };
        let plain = mean_rank(&build(&|v| v)).unwrap();
        let moved = mean_rank(&build(&|v| (3.0 * v).exp() + v)).unwrap();
        for (x, y) in plain.rows.iter().zip(&moved.rows) {
            assert_eq!((&x.model, x.mean_rank, x.mean_rank_by_dataset), (&y.model, y.mean_rank, y.mean_rank_by_dataset));
        }
    }
}

fn c8_decoding_totality() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let label_sets: Vec<Vec<&str>> = vec![
        vec!["pro", "con"],
        vec!["claim", "premise", "none"],
        vec!["Attack", "Support", "No relation"],
        vec!["yes", "no"],
        vec!["1", "2", "3"],
    ];
    let prefixes = ["", "Answer: ", "The label is ", "I think 7 ", "(", "-> ", "probably: ", "42. "];
    let suffixes = ["", ".", " because it argues", " — explanation…", " (score 9)", "ly", "s", " 10"];
    let ranges = [(1.0, 5.0), (0.0, 1.0), (-2.0, 2.0)];
    let numerals = ["3", "4.5", "6", "-1", "0.25", "10", "+2", "1e3", "3.", "05"];
    let mut checked = 0;
    while checked < 500 {
        let p = prefixes.choose(&mut rng).unwrap();
        let sfx = suffixes.choose(&mut rng).unwrap();
        if rng.gen_bool(0.5) {
            let set = label_sets.choose(&mut rng).unwrap();
            let mut core = set.choose(&mut rng).unwrap().to_string();
            match rng.gen_range(0..3) {
                0 => core = core.to_uppercase(),
                1 => core.truncate(core.len().saturating_sub(1).max(1)),
                _ => {}
            }
            let raw = format!("{p}{core}{sfx}");
            let labels: Vec<String> = set.iter().map(|s| s.to_string()).collect();
            let a = compile_automaton(&TaskType::Classification { labels: labels.clone() }).unwrap();
            let canon: Vec<String> = labels.iter().map(|l| canonical_label(l)).collect();
            match decode(&raw, &a) {
                None => {}
                Some(Decoded::Label(l)) => assert!(canon.contains(&l), "{raw:?} -> {l:?}"),
                Some(other) => panic!("{raw:?} -> {other:?}"),
            }
        } else {
            let (min, max) = *ranges.choose(&mut rng).unwrap();
            let raw = format!("{p}{}{sfx}", numerals.choose(&mut rng).unwrap());
            let a = compile_automaton(&TaskType::Regression { min, max }).unwrap();
            match decode(&raw, &a) {
                None => {}
                Some(Decoded::Number(x)) => assert!(x >= min && x <= max, "{raw:?} -> {x}"),
                Some(other) => panic!("{raw:?} -> {other:?}"),
            }
        }
        checked += 1;
    }
    for set in &label_sets {
        let labels: Vec<String> = set.iter().map(|s| s.to_string()).collect();
        let a = compile_automaton(&TaskType::Classification { labels: labels.clone() }).unwrap();
        for l in &labels {
            for form in [l.clone(), l.to_uppercase(), l.to_lowercase()] {
                let raw = format!("{form} — explanation: the text gives reasons…");
                assert_eq!(decode(&raw, &a), Some(Decoded::Label(canonical_label(l))), "{raw:?}");
            }
        }
    }
}

fn generation_tasks(prefix: &str, tasks: usize, per_task: usize) -> Vec<Task> {
    (0..tasks)
        .map(|t| Task {
            instruction: Instruction {
                id: TaskId::new(format!("{prefix}-{t}")),
                text: format!("{prefix} instruction {t}"),
                provenance: Provenance::Seed,
                area: None,
                source_dataset: None,
            },
            task_type: TaskType::Generation,
            instances: (0..per_task).map(|i| Instance::new(format!("in {i}"), format!("out {i}"))).collect(),
        })
        .collect()
}

fn c9_mixture_budget() {
    let names = ["seed", "generated", "extra"];
    let pools: Vec<Vec<Task>> = names.iter().map(|n| generation_tasks(n, 30, 1800)).collect();
    for mask in 1u8..8 {
        for budget in [5usize, 52_445] {
            let subset: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let q = mixture_quotas(budget, subset.len());
            assert_eq!(q.iter().sum::<usize>(), budget);
            assert!(q.iter().max().unwrap() - q.iter().min().unwrap() <= 1);
            let spec = MixtureSpec {
                sources: names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| SourceSpec { name: (*n).into(), task_file: String::new(), included: subset.contains(&i) })
                    .collect(),
                total_budget: budget,
            };
            let m = assemble_mixture(&spec, &pools, &mut substream(3, "mix")).unwrap();
            assert_eq!(m.items.len(), budget);
            let drawn: Vec<usize> = m.allocations.iter().filter(|a| a.included).map(|a| a.drawn).collect();
            assert_eq!(drawn, q, "mask {mask} budget {budget}");
            assert!(m.warnings.is_empty());
        }
    }
}

fn c10_training_records() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let alphabet: Vec<char> = "abc XYZ\n\t.,:ü💬—#".chars().collect();
    let text = |rng: &mut ChaCha8Rng, lo: usize| -> String {
        let n = rng.gen_range(lo..30);
        (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
    };
    for k in 0..1000 {
        let instr = text(&mut rng, 1);
        let inst = Instance::new(text(&mut rng, 0), text(&mut rng, 1));
        let r = ALPACA.render_record(&instr, &inst, &TaskId::new(format!("t{k}")), "src");
        let suffix: String = r.rendered_text.chars().skip(r.loss_start_offset).collect();
        assert_eq!(suffix, format!("{}{}", inst.output, ALPACA.terminator));
        assert_eq!(r.output(&ALPACA), Some(inst.output.as_str()));
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/records.jsonl");
    let tasks = [
        (TaskId::new("seed-001"), "Classify the stance of the comment toward the topic.", Instance::new("Topic: school uniforms\nComment: They save families money.", "pro")),
        (TaskId::new("seed-002"), "Write a counterargument to the claim.", Instance::new("", "Uniforms suppress self-expression, and cost is rarely the deciding factor.")),
        (TaskId::new("gen-000003"), "Rate the argument's quality from 1 to 5.", Instance::new("Nuclear power is clean — so we must use it.", "2")),
    ];
    let items = tasks.iter().map(|(id, instr, inst)| (*instr, inst, id, "seed"));
    let bytes = to_jsonl(&render_records(&ALPACA, items));
    if std::env::var_os("ARGTUNE_BLESS").is_some() {
        std::fs::write(&golden, &bytes).unwrap();
    }
    assert_eq!(bytes, read(&golden));
}

/// Mean of the per-task metric values, tasks in id order.
fn mean_by_metric(per_task: &BTreeMap<TaskId, (Metric, f64)>) -> BTreeMap<Metric, f64> {
    let mut acc: BTreeMap<Metric, (f64, usize)> = BTreeMap::new();
    for (m, v) in per_task.values() {
        let e = acc.entry(*m).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect()
}

fn fixed_answer(task: &Task) -> String {
    match &task.task_type {
        TaskType::Classification { labels } => labels[0].clone(),
        TaskType::Regression { .. } => "3".into(),
        TaskType::Generation => "A reply to the claim on rent control.".into(),
    }
}

/// Expected metric of the fixed-answer model on one task, every instance
/// evaluated (tasks hold fewer instances than the evaluation sample size).
fn fixed_oracle(task: &Task) -> (Metric, f64) {
    let n = task.instances.len() as f64;
    let answer = fixed_answer(task);
    match &task.task_type {
        TaskType::Classification { .. } => {
            let hits = task.instances.iter().filter(|i| i.output.eq_ignore_ascii_case(&answer)).count();
            (Metric::MicroF1, hits as f64 / n)
        }
        TaskType::Regression { .. } => {
            let gold: Vec<f64> = task.instances.iter().map(|i| i.output.parse().unwrap()).collect();
            let mean = gold.iter().sum::<f64>() / n;
            let model: f64 = gold.iter().map(|g| (3.0 - g).abs()).sum::<f64>() / n;
            let base: f64 = gold.iter().map(|g| (mean - g).abs()).sum::<f64>() / n;
            (Metric::Mase, model / base)
        }
        TaskType::Generation => {
            let a = tokenize(&answer);
            let total: f64 = task.instances.iter().map(|i| f1_oracle(&a, &tokenize(&i.output))).sum();
            (Metric::RougeL, total / n)
        }
    }
}

fn c11_end_to_end() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace(dir.path(), 35, "");
    let fx = dir.path().join("gen_fx.jsonl");
    assert_eq!(run(&["--config", s(&cfg), "--output-dir", s(&dir.path().join("rec")), "generate", "--target-count", "50", "--record-fixtures", s(&fx)]).code, 0);

    let r = run(&["--config", s(&cfg), "--mock-fixtures", s(&fx), "generate", "--target-count", "50"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = run(&["--config", s(&cfg), "split"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = run(&["--config", s(&cfg), "mix", "--budget", "1000"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(read(&dir.path().join("out/mix/records.jsonl")).lines().count(), 1000);

    let test_tasks = read_tasks(&dir.path().join("out/split/test_tasks.jsonl")).unwrap();
    assert_eq!(test_tasks.len(), 21);
    let fixture = |answer: &dyn Fn(&Task, &Instance) -> String| -> Vec<FixtureRecord> {
        test_tasks
            .iter()
            .flat_map(|t| t.instances.iter().map(move |i| (t, i)))
            .map(|(t, i)| FixtureRecord {
                prompt_hash: prompt_hash(&eval_prompt(&ALPACA, t, i)),
                occurrence: 0,
                response_text: answer(t, i),
            })
            .collect()
    };
    let gold_fx = dir.path().join("gold.jsonl");
    let fixed_fx = dir.path().join("fixed.jsonl");
    write_jsonl(&gold_fx, &fixture(&|_, i| i.output.clone())).unwrap();
    write_jsonl(&fixed_fx, &fixture(&|t, _| fixed_answer(t))).unwrap();
    let r = run(&[
        "--config", s(&cfg), "eval",
        "--models", &format!("gold=mock:{}", gold_fx.display()),
        "--models", &format!("fixed=mock:{}", fixed_fx.display()),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let perfect: BTreeMap<TaskId, (Metric, f64)> = test_tasks
        .iter()
        .map(|t| {
            let m = Metric::for_kind(t.kind());
            (t.id().clone(), (m, if m == Metric::Mase { 0.0 } else { 1.0 }))
        })
        .collect();
    let fixed: BTreeMap<TaskId, (Metric, f64)> = test_tasks.iter().map(|t| (t.id().clone(), fixed_oracle(t))).collect();
    // The fixed model is strictly worse on every task.
    for (id, (m, v)) in &fixed {
        let better = if m.higher_is_better() { *v < 1.0 } else { *v > 0.0 };
        assert!(better, "{id}: {v}");
    }
    let board: Value = serde_json::from_str(&read(&dir.path().join("out/eval/leaderboard.json"))).unwrap();
    assert_eq!(board["tasks"], 21);
    let rows = board["rows"].as_array().unwrap();
    for (row, model, expected, rank) in [(&rows[0], "gold", &perfect, 1.0), (&rows[1], "fixed", &fixed, 2.0)] {
        assert_eq!(row["model"], model);
        assert_eq!(row["mean_rank"], rank);
        assert_eq!(row["mean_rank_by_dataset"], rank);
        let got: BTreeMap<String, f64> = serde_json::from_value(row["metrics"].clone()).unwrap();
        let want: BTreeMap<String, f64> = mean_by_metric(expected)
            .into_iter()
            .map(|(m, v)| (serde_json::to_value(m).unwrap().as_str().unwrap().to_string(), v))
            .collect();
        assert_eq!(got, want, "{model}");
    }
    assert!(t0.elapsed() < Duration::from_secs(120));
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn()); 11] = [
        ("ROUGE-L matches the full-table oracle on 1000 pairs", c1_rouge_oracle),
        ("novelty guarantee holds on a 100-task synthesis run", c2_novelty_guarantee),
        ("replayed generation runs are byte-identical", c3_determinism),
        ("105-task registry reserves 21 (7/7/7); 100 instances split 70/10/20", c4_split_arithmetic),
        ("balanced sampling over labels and value bins", c5_balanced_sampling),
        ("MASE identities and micro-F1 equals accuracy", c6_metric_identities),
        ("mean rank fixture {1.25, 1.75} and transform invariance", c7_mean_rank),
        ("guided decoding stays inside the output language", c8_decoding_totality),
        ("mixture quotas meet the budget for every source subset", c9_mixture_budget),
        ("training records reconstruct outputs; golden export stable", c10_training_records),
        ("generate, split, mix and eval reproduce the expected leaderboard", c11_end_to_end),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        // Written to the raw handle so the line shows without --nocapture.
        let line = format!("criterion {:>2} {} {name} ({:.2?})\n", k + 1, if ok { "PASS" } else { "FAIL" }, t0.elapsed());
        let _ = std::io::stderr().write_all(line.as_bytes());
        if !ok {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
