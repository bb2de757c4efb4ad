//! Equal-budget training mixtures and their export.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::record::{PromptTemplate, TrainingRecord};
use super::sampling::{sample_instances, sampleable_count, water_fill};
use crate::task::{Instance, Task, TaskId};

/// Default total number of training instances in a mixture.
pub const DEFAULT_MIXTURE_BUDGET: usize = 52_445;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub task_file: String,
    #[serde(default = "default_true")]
    pub included: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureSpec {
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_budget")]
    pub total_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_MIXTURE_BUDGET
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            sources: Vec::new(),
            total_budget: DEFAULT_MIXTURE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MixtureError {
    #[error("no included sources")]
    NoSources,
    #[error("{specs} source specs but {pools} task pools")]
    PoolCountMismatch { specs: usize, pools: usize },
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
}

/// Equal split of `budget` over `sources`, remainder to earlier sources.
pub fn mixture_quotas(budget: usize, sources: usize) -> Vec<usize> {
    if sources == 0 {
        return Vec::new();
    }
    let base = budget / sources;
    let extra = budget % sources;
    (0..sources).map(|i| base + usize::from(i < extra)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceAllocation {
    pub name: String,
    pub included: bool,
    /// Equal-share quota before any refill.
    pub quota: usize,
    /// Instances actually drawn.
    pub drawn: usize,
    /// Instances available for sampling.
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureItem {
    pub source: String,
    pub task_id: TaskId,
    pub instruction: String,
    pub instance: Instance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mixture {
    pub items: Vec<MixtureItem>,
    pub allocations: Vec<SourceAllocation>,
    pub warnings: Vec<String>,
}

/// Draws `total_budget` instances split equally over the included sources.
///
/// Within a source the share is split equally over its tasks and each
/// task's draw follows the balanced sampling discipline. A source that
/// cannot fill its share is drained and the shortfall is refilled evenly
/// from the others, with a warning. `pools[i]` holds the tasks of
/// `spec.sources[i]`; the final order is shuffled.
pub fn assemble_mixture<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    pools: &[Vec<Task>],
    rng: &mut R,
) -> Result<Mixture, MixtureError> {
    if pools.len() != spec.sources.len() {
        return Err(MixtureError::PoolCountMismatch {
            specs: spec.sources.len(),
            pools: pools.len(),
        });
    }
    let included: Vec<usize> = (0..spec.sources.len())
        .filter(|&i| spec.sources[i].included)
        .collect();
    if included.is_empty() {
        return Err(MixtureError::NoSources);
    }

    let available: Vec<usize> = pools
        .iter()
        .map(|tasks| {
            tasks
                .iter()
                .map(|t| sampleable_count(&t.task_type, &t.instances))
                .sum()
        })
        .collect();
    let quotas = mixture_quotas(spec.total_budget, included.len());
    let caps: Vec<usize> = included.iter().map(|&i| available[i]).collect();
    let shares = water_fill(&caps, spec.total_budget);

    let mut warnings = Vec::new();
    let mut allocations = Vec::new();
    let mut items = Vec::new();
    for (k, src) in spec.sources.iter().enumerate() {
        let Some(pos) = included.iter().position(|&i| i == k) else {
            allocations.push(SourceAllocation {
                name: src.name.clone(),
                included: false,
                quota: 0,
                drawn: 0,
                available: available[k],
            });
            continue;
        };
        let (quota, share) = (quotas[pos], shares[pos]);
        if available[k] < quota {
            warnings.push(format!(
                "source {} has {} sampleable instances for a quota of {}; shortfall refilled from other sources",
                src.name, available[k], quota
            ));
        }
        let tasks = &pools[k];
        let task_caps: Vec<usize> = tasks
            .iter()
            .map(|t| sampleable_count(&t.task_type, &t.instances))
            .collect();
        let per_task = water_fill(&task_caps, share);
        let mut drawn = 0;
        for (task, n) in tasks.iter().zip(per_task) {
            if n == 0 {
                continue;
            }
            let picked = sample_instances(&task.task_type, &task.instances, n, rng)
                .expect("tasks with a positive allocation have instances");
            drawn += picked.len();
            items.extend(picked.into_iter().map(|instance| MixtureItem {
                source: src.name.clone(),
                task_id: task.id().clone(),
                instruction: task.instruction.text.clone(),
                instance,
            }));
        }
        allocations.push(SourceAllocation {
            name: src.name.clone(),
            included: true,
            quota,
            drawn,
            available: available[k],
        });
    }
    let total_drawn: usize = allocations.iter().map(|a| a.drawn).sum();
    if total_drawn < spec.total_budget {
        warnings.push(format!(
            "all sources exhausted: drew {total_drawn} of {} budgeted instances",
            spec.total_budget
        ));
    }
    items.shuffle(rng);
    Ok(Mixture {
        items,
        allocations,
        warnings,
    })
}

/// Fine-tuning settings recorded alongside exported records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub adapter_rank: u32,
    pub amplification: u32,
    pub dropout: f64,
    pub epochs: u32,
    pub learning_rate: f64,
    pub effective_batch: u32,
    pub schedule: String,
    pub warmup_ratio: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            adapter_rank: 16,
            amplification: 32,
            dropout: 0.05,
            epochs: 7,
            learning_rate: 9.88e-5,
            effective_batch: 64,
            schedule: "cosine".into(),
            warmup_ratio: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureManifest {
    pub template_name: String,
    pub rng_seed: u64,
    pub total_budget: usize,
    pub records: usize,
    pub sources: Vec<SourceAllocation>,
    pub warnings: Vec<String>,
    pub hyperparameters: Hyperparameters,
}

/// Renders every mixture item with the named template.
pub fn export_training_records(
    mixture: &Mixture,
    spec: &MixtureSpec,
    template_name: &str,
    rng_seed: u64,
) -> Result<(Vec<TrainingRecord>, MixtureManifest), MixtureError> {
    let template = PromptTemplate::by_name(template_name)
        .ok_or_else(|| MixtureError::UnknownTemplate(template_name.into()))?;
    let records: Vec<TrainingRecord> = mixture
        .items
        .iter()
        .map(|it| template.render_record(&it.instruction, &it.instance, &it.task_id, &it.source))
        .collect();
    let manifest = MixtureManifest {
        template_name: template.name.into(),
        rng_seed,
        total_budget: spec.total_budget,
        records: records.len(),
        sources: mixture.allocations.clone(),
        warnings: mixture.warnings.clone(),
        hyperparameters: Hyperparameters::default(),
    };
    Ok((records, manifest))
}
