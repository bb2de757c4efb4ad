//! Unseen-task reservation and per-task instance splits.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::water_fill;
use crate::task::{Area, Instance, Task, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_task_fraction: f64,
    /// train : validation : test
    pub instance_ratios: [u32; 3],
    pub area_balanced: bool,
    pub rng_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_task_fraction: 0.20,
            instance_ratios: [7, 1, 2],
            area_balanced: true,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("task {0} has no area tag")]
    MissingArea(TaskId),
    #[error("test task fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("instance ratios must all be positive")]
    InvalidRatios,
    #[error("dataset group {0} mixes tasks from different areas")]
    MixedAreaGroup(String),
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), SplitError> {
        let f = self.test_task_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(SplitError::InvalidFraction(f));
        }
        if self.instance_ratios.contains(&0) {
            return Err(SplitError::InvalidRatios);
        }
        Ok(())
    }

    /// `⌈fraction · n⌉`, tolerant of binary rounding (0.2 · 105 is 21).
    pub fn reserved_count(&self, n: usize) -> usize {
        let exact = self.test_task_fraction * n as f64;
        (libm::ceil(exact - 1e-9) as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub train_tasks: Vec<Task>,
    pub test_tasks: Vec<Task>,
}

struct Group {
    name: String,
    area: Area,
    members: Vec<usize>,
}

/// Reserves `⌈fraction · N⌉` tasks as unseen test tasks.
///
/// With `area_balanced`, per-area reserved counts differ by at most one
/// (earlier areas in mining, assessment, generation order take remainders).
/// Tasks mapped to the same name in `groups` are reserved together; the
/// group is skipped if it would overshoot its area's quota, so grouped
/// reservations can fall short of the target. Both halves keep registry
/// order.
pub fn reserve_test_tasks<R: Rng + ?Sized>(
    registry: &[Task],
    spec: &SplitSpec,
    groups: Option<&BTreeMap<TaskId, String>>,
    rng: &mut R,
) -> Result<Reservation, SplitError> {
    spec.validate()?;
    let mut by_name: BTreeMap<String, usize> = BTreeMap::new();
    let mut all: Vec<Group> = Vec::new();
    for (i, t) in registry.iter().enumerate() {
        let area = t
            .instruction
            .area
            .ok_or_else(|| SplitError::MissingArea(t.id().clone()))?;
        let name = groups
            .and_then(|g| g.get(t.id()))
            .map(|g| alloc::format!("group:{g}"))
            .unwrap_or_else(|| alloc::format!("task:{}", t.id()));
        match by_name.get(&name) {
            Some(&gi) => {
                if all[gi].area != area {
                    return Err(SplitError::MixedAreaGroup(all[gi].name.clone()));
                }
                all[gi].members.push(i);
            }
            None => {
                by_name.insert(name.clone(), all.len());
                all.push(Group {
                    name,
                    area,
                    members: alloc::vec![i],
                });
            }
        }
    }

    let target = spec.reserved_count(registry.len());
    let strata: Vec<Vec<usize>> = if spec.area_balanced {
        Area::ALL
            .iter()
            .map(|a| (0..all.len()).filter(|&g| all[g].area == *a).collect())
            .collect()
    } else {
        alloc::vec![(0..all.len()).collect()]
    };
    let caps: Vec<usize> = strata
        .iter()
        .map(|s| s.iter().map(|&g| all[g].members.len()).sum())
        .collect();
    let quotas = water_fill(&caps, target);

    let mut reserved = alloc::vec![false; registry.len()];
    for (mut stratum, quota) in strata.into_iter().zip(quotas) {
        stratum.shuffle(rng);
        let mut taken = 0;
        for g in stratum {
            let size = all[g].members.len();
            if taken + size <= quota {
                taken += size;
                for &m in &all[g].members {
                    reserved[m] = true;
                }
            }
            if taken == quota {
                break;
            }
        }
    }

    let (mut train_tasks, mut test_tasks) = (Vec::new(), Vec::new());
    for (t, r) in registry.iter().zip(reserved) {
        if r {
            test_tasks.push(t.clone());
        } else {
            train_tasks.push(t.clone());
        }
    }
    Ok(Reservation {
        train_tasks,
        test_tasks,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceSplit {
    pub train: Vec<Instance>,
    pub val: Vec<Instance>,
    pub test: Vec<Instance>,
}

/// Train/validation/test sizes for `m` instances: proportional floors, then
/// leftover instances handed out one at a time in train, test, validation
/// order.
pub fn split_sizes(m: usize, ratios: [u32; 3]) -> [usize; 3] {
    let total: u64 = ratios.iter().map(|&r| u64::from(r)).sum();
    let mut sizes = [0usize; 3];
    for (s, r) in sizes.iter_mut().zip(ratios) {
        *s = (m as u64 * u64::from(r) / total) as usize;
    }
    let mut rest = m - sizes.iter().sum::<usize>();
    for slot in [0usize, 2, 1].iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[*slot] += 1;
        rest -= 1;
    }
    sizes
}

/// Shuffles `instances` and cuts them into train/validation/test parts.
pub fn split_instances<R: Rng + ?Sized>(
    instances: &[Instance],
    ratios: [u32; 3],
    rng: &mut R,
) -> InstanceSplit {
    let [train_n, val_n, _] = split_sizes(instances.len(), ratios);
    let mut shuffled = instances.to_vec();
    shuffled.shuffle(rng);
    let test = shuffled.split_off(train_n + val_n);
    let val = shuffled.split_off(train_n);
    InstanceSplit {
        train: shuffled,
        val,
        test,
    }
}
