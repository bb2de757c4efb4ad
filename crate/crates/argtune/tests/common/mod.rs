#![allow(dead_code)]

use std::path::{Path, PathBuf};

use argtune::cli;
use argtune_core::task::{Area, Instance, Instruction, Provenance, Task, TaskId, TaskType};

const TOPICS: &[&str] = &[
    "rent control", "nuclear power", "homework", "tariffs", "school uniforms",
    "online voting", "a four-day week", "space exploration",
];

/// `per_area` tasks in each area, cycling through the three task kinds,
/// with 20 instances each.
pub fn seed_registry(per_area: usize) -> Vec<Task> {
    let mut out = Vec::new();
    for (a, area) in Area::ALL.iter().enumerate() {
        for k in 0..per_area {
            let n = a * per_area + k;
            let (text, task_type) = match n % 3 {
                0 => (
                    format!("Classify argument {n} about the topic as claim, premise or none."),
                    TaskType::Classification {
                        labels: vec!["claim".into(), "premise".into(), "none".into()],
                    },
                ),
                1 => (
                    format!("Rate the quality of argument {n} on a scale from 1 to 5."),
                    TaskType::Regression { min: 1.0, max: 5.0 },
                ),
                _ => (
                    format!("Write a counterargument {n} to the given claim."),
                    TaskType::Generation,
                ),
            };
            let instances = (0..20)
                .map(|i| {
                    let input = format!("Argument {i} about {} number {n}.", TOPICS[(i + n) % TOPICS.len()]);
                    let output = match &task_type {
                        TaskType::Classification { labels } => labels[i % 3].clone(),
                        TaskType::Regression { .. } => format!("{}", 1 + i % 5),
                        TaskType::Generation => format!("A reply to point {i} on {}.", TOPICS[i % TOPICS.len()]),
                    };
                    Instance::new(input, output)
                })
                .collect();
            out.push(Task {
                instruction: Instruction {
                    id: TaskId::new(format!("seed-{n:03}")),
                    text,
                    provenance: Provenance::Seed,
                    area: Some(*area),
                    source_dataset: Some(format!("ds{}", n / 2)),
                },
                instances,
                task_type,
            });
        }
    }
    out
}

pub fn write_tasks(path: &Path, tasks: &[Task]) {
    argtune::io::write_tasks(path, tasks).unwrap();
}

/// Writes seeds, negatives and a config into `dir`; returns the config path.
pub fn workspace(dir: &Path, per_area: usize, extra: &str) -> PathBuf {
    write_tasks(&dir.join("seeds.jsonl"), &seed_registry(per_area));
    std::fs::write(
        dir.join("neg.txt"),
        "Write a poem about autumn.\nTranslate the sentence into German.\nSort the numbers in ascending order.\n",
    )
    .unwrap();
    let cfg = format!(
        "rng_seed = 42\n{extra}\n[backend]\nbase_url = \"sim:1\"\n[synthesis]\ntarget_count = 100\nnegative_exemplar_file = \"{}\"\n[paths]\nseed_tasks = \"{}\"\noutput_dir = \"{}\"\n",
        dir.join("neg.txt").display(),
        dir.join("seeds.jsonl").display(),
        dir.join("out").display(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["argtune"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
