//! Balanced instance sampling.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::task::{canonical_label, parse_score, Instance, Task, TaskType};

/// Number of equal-width bins used to cover a regression range.
pub const REGRESSION_BINS: usize = 10;

/// Default number of evaluation instances drawn per task.
pub const EVAL_INSTANCES_PER_TASK: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("no instances to sample from")]
    Empty,
}

/// Distributes `total` units over slots with the given capacities as evenly
/// as possible: unsaturated slots differ by at most one and earlier slots
/// receive the remainder. Returns fewer than `total` units only when every
/// slot is full.
pub fn water_fill(capacities: &[usize], total: usize) -> Vec<usize> {
    let mut alloc = vec![0usize; capacities.len()];
    let mut remaining = total;
    loop {
        let open: Vec<usize> = (0..capacities.len())
            .filter(|&i| alloc[i] < capacities[i])
            .collect();
        if remaining == 0 || open.is_empty() {
            return alloc;
        }
        let share = remaining / open.len();
        if share == 0 {
            for &i in open.iter().take(remaining) {
                alloc[i] += 1;
            }
            return alloc;
        }
        for &i in &open {
            let give = share.min(capacities[i] - alloc[i]);
            alloc[i] += give;
            remaining -= give;
        }
    }
}

/// Bin of `value` among [`REGRESSION_BINS`] equal-width bins over
/// `[min, max]`; the maximum falls into the last bin and values outside the
/// range are clamped.
pub fn regression_bin(value: f64, min: f64, max: f64) -> usize {
    let pos = (value - min) / (max - min) * REGRESSION_BINS as f64;
    if pos.is_nan() || pos < 0.0 {
        0
    } else {
        (libm::floor(pos) as usize).min(REGRESSION_BINS - 1)
    }
}

/// Splits instance indices into the strata used for balanced sampling.
/// Instances that fit no stratum (unknown label, unparseable score) are
/// left out.
fn strata(task_type: &TaskType, instances: &[Instance]) -> Vec<Vec<usize>> {
    match task_type {
        TaskType::Classification { labels } => {
            let mut order: Vec<alloc::string::String> = Vec::new();
            for l in labels {
                let c = canonical_label(l);
                if !order.contains(&c) {
                    order.push(c);
                }
            }
            let pos: BTreeMap<&str, usize> =
                order.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
            let mut buckets = vec![Vec::new(); order.len()];
            for (i, inst) in instances.iter().enumerate() {
                if let Some(&b) = pos.get(canonical_label(&inst.output).as_str()) {
                    buckets[b].push(i);
                }
            }
            buckets
        }
        TaskType::Regression { min, max } => {
            let mut buckets = vec![Vec::new(); REGRESSION_BINS];
            for (i, inst) in instances.iter().enumerate() {
                if let Some(v) = parse_score(&inst.output) {
                    buckets[regression_bin(v, *min, *max)].push(i);
                }
            }
            buckets
        }
        TaskType::Generation => vec![(0..instances.len()).collect()],
    }
}

/// Number of instances [`sample_instances`] can draw from for this task type.
pub fn sampleable_count(task_type: &TaskType, instances: &[Instance]) -> usize {
    strata(task_type, instances).iter().map(Vec::len).sum()
}

/// Draws up to `n` instances without replacement: label-balanced for
/// classification, spread over value bins for regression, uniform for
/// generation. Output order is shuffled.
pub fn sample_instances<R: Rng + ?Sized>(
    task_type: &TaskType,
    instances: &[Instance],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Instance>, SampleError> {
    if instances.is_empty() {
        return Err(SampleError::Empty);
    }
    let mut buckets = strata(task_type, instances);
    let caps: Vec<usize> = buckets.iter().map(Vec::len).collect();
    let quotas = water_fill(&caps, n);
    let mut picked: Vec<usize> = Vec::new();
    for (bucket, quota) in buckets.iter_mut().zip(quotas) {
        bucket.shuffle(rng);
        picked.extend_from_slice(&bucket[..quota]);
    }
    picked.shuffle(rng);
    Ok(picked.into_iter().map(|i| instances[i].clone()).collect())
}

/// [`sample_instances`] over the task's own instances.
pub fn sample_eval_instances<R: Rng + ?Sized>(
    task: &Task,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Instance>, SampleError> {
    sample_instances(&task.task_type, &task.instances, n, rng)
}
