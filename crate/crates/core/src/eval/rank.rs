//! Mean-rank leaderboards with fractional ranks for ties.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use crate::task::TaskId;

/// One model's score on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub metric: Metric,
    pub value: f64,
    /// Dataset the task belongs to, for the per-dataset rank view.
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    pub scores: BTreeMap<TaskId, TaskScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    /// Mean metric value over the tasks scored with each metric.
    pub metrics: BTreeMap<Metric, f64>,
    /// Average of the per-task ranks.
    pub mean_rank: f64,
    /// Ranks first averaged within each dataset, then across datasets.
    pub mean_rank_by_dataset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub tasks: usize,
    pub datasets: usize,
    pub rows: Vec<LeaderboardRow>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error("no models to rank")]
    NoModels,
    #[error("model {model} does not cover the same tasks as {reference}")]
    CoverageMismatch { model: String, reference: String },
    #[error("task {task} is scored with different metrics across models")]
    MetricMismatch { task: TaskId },
    #[error("model {model} has a non-finite score on task {task}")]
    NonFinite { model: String, task: TaskId },
}

/// Fractional ranks (1 = best) of `values`; tied values share the average of
/// the positions they occupy.
pub fn average_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Ranks models per task and averages the ranks per model.
pub fn mean_rank(results: &[ModelScores]) -> Result<Leaderboard, RankError> {
    let first = results.first().ok_or(RankError::NoModels)?;
    let task_ids: BTreeSet<&TaskId> = first.scores.keys().collect();
    for m in results {
        if m.scores.keys().collect::<BTreeSet<_>>() != task_ids {
            return Err(RankError::CoverageMismatch {
                model: m.model.clone(),
                reference: first.model.clone(),
            });
        }
        for (task, s) in &m.scores {
            if !s.value.is_finite() {
                return Err(RankError::NonFinite {
                    model: m.model.clone(),
                    task: task.clone(),
                });
            }
            if s.metric != first.scores[task].metric {
                return Err(RankError::MetricMismatch { task: task.clone() });
            }
        }
    }

    let n = results.len();
    let mut rank_sums = alloc::vec![0.0; n];
    // dataset -> (per-model rank sums, task count)
    let mut by_dataset: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mut metric_sums: Vec<BTreeMap<Metric, (f64, usize)>> = alloc::vec![BTreeMap::new(); n];

    for task in &task_ids {
        let reference = &first.scores[*task];
        let values: Vec<f64> = results.iter().map(|m| m.scores[*task].value).collect();
        let ranks = average_ranks(&values, reference.metric.higher_is_better());
        let dataset = reference
            .dataset
            .clone()
            .unwrap_or_else(|| task.as_str().into());
        let entry = by_dataset
            .entry(dataset)
            .or_insert_with(|| (alloc::vec![0.0; n], 0));
        entry.1 += 1;
        for (i, r) in ranks.iter().enumerate() {
            rank_sums[i] += r;
            entry.0[i] += r;
            let slot = metric_sums[i].entry(reference.metric).or_insert((0.0, 0));
            slot.0 += values[i];
            slot.1 += 1;
        }
    }

    let tasks = task_ids.len();
    let datasets = by_dataset.len();
    let mut rows: Vec<LeaderboardRow> = results
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (mean_rank, mean_rank_by_dataset) = if tasks == 0 {
                (1.0, 1.0)
            } else {
                let by_ds: f64 = by_dataset
                    .values()
                    .map(|(sums, count)| sums[i] / *count as f64)
                    .sum::<f64>()
                    / datasets as f64;
                (rank_sums[i] / tasks as f64, by_ds)
            };
            LeaderboardRow {
                model: m.model.clone(),
                metrics: metric_sums[i]
                    .iter()
                    .map(|(k, (sum, count))| (*k, sum / *count as f64))
                    .collect(),
                mean_rank,
                mean_rank_by_dataset,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mean_rank
            .partial_cmp(&b.mean_rank)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.model.cmp(&b.model))
    });
    Ok(Leaderboard {
        tasks,
        datasets,
        rows,
    })
}
