//! Dataset statistics and the instruction diversity report.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rouge::SimilarityIndex;
use crate::task::{Task, TaskId, TaskKind};

pub const DIVERSITY_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounts {
    pub instructions: usize,
    pub instances: usize,
}

/// Distribution of each generated instruction's maximum ROUGE-L F1 against
/// the seed instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub compared: usize,
    pub seeds: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Counts over `[0, 0.1), [0.1, 0.2), ... [0.9, 1.0]`.
    pub histogram: [usize; DIVERSITY_BINS],
    /// Per generated task: its maximum similarity.
    pub per_task: Vec<(TaskId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub instructions_total: usize,
    pub instances_total: usize,
    pub per_kind: BTreeMap<TaskKind, KindCounts>,
    pub non_empty_inputs: usize,
    pub avg_len_instruction: f64,
    pub avg_len_input: f64,
    pub avg_len_output: f64,
    pub diversity: Option<DiversityReport>,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

fn avg(total: usize, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        total as f64 / count as f64
    }
}

/// Counts and mean whitespace word lengths; input length is averaged over
/// non-empty inputs only. The diversity report is present when the tasks
/// contain both seed and generated instructions.
pub fn dataset_stats(tasks: &[Task]) -> StatsReport {
    let mut per_kind: BTreeMap<TaskKind, KindCounts> =
        TaskKind::ALL.iter().map(|k| (*k, KindCounts::default())).collect();
    let (mut ins_words, mut in_words, mut out_words) = (0, 0, 0);
    let (mut instances, mut non_empty_inputs) = (0, 0);
    for t in tasks {
        let c = per_kind.entry(t.kind()).or_default();
        c.instructions += 1;
        c.instances += t.instances.len();
        ins_words += words(&t.instruction.text);
        for i in &t.instances {
            instances += 1;
            out_words += words(&i.output);
            if !i.input.trim().is_empty() {
                non_empty_inputs += 1;
                in_words += words(&i.input);
            }
        }
    }
    StatsReport {
        instructions_total: tasks.len(),
        instances_total: instances,
        per_kind,
        non_empty_inputs,
        avg_len_instruction: avg(ins_words, tasks.len()),
        avg_len_input: avg(in_words, non_empty_inputs),
        avg_len_output: avg(out_words, instances),
        diversity: diversity(tasks),
    }
}

fn diversity(tasks: &[Task]) -> Option<DiversityReport> {
    let seeds: Vec<&str> = tasks
        .iter()
        .filter(|t| !t.is_generated())
        .map(|t| t.instruction.text.as_str())
        .collect();
    let generated: Vec<&Task> = tasks.iter().filter(|t| t.is_generated()).collect();
    if seeds.is_empty() || generated.is_empty() {
        return None;
    }
    let index = SimilarityIndex::from_texts(&seeds);
    let per_task: Vec<(TaskId, f64)> = generated
        .iter()
        .map(|t| (t.id().clone(), index.max_similarity(&t.instruction.text).0.value()))
        .collect();
    let mut histogram = [0usize; DIVERSITY_BINS];
    for (_, s) in &per_task {
        let bin = ((s * DIVERSITY_BINS as f64) as usize).min(DIVERSITY_BINS - 1);
        histogram[bin] += 1;
    }
    let values = per_task.iter().map(|(_, s)| *s);
    Some(DiversityReport {
        compared: per_task.len(),
        seeds: seeds.len(),
        mean: values.clone().sum::<f64>() / per_task.len() as f64,
        min: values.clone().fold(f64::INFINITY, f64::min),
        max: values.fold(f64::NEG_INFINITY, f64::max),
        histogram,
        per_task,
    })
}
