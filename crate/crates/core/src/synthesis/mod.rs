//! The generate / filter / instantiate loop that grows a task pool from
//! seed tasks.
//!
//! Each iteration samples few-shot instructions from the pool, asks the
//! model for new instructions, keeps those the model judges relevant and
//! that are novel enough (ROUGE-L F1 below the threshold against everything
//! pooled so far), determines each survivor's task type, generates its
//! instances and appends the resulting task.

mod prompts;
mod run;

pub use prompts::{
    malformed_reason, parse_instance_blocks, parse_numbered_list, parse_relevance, parse_task_kind,
    render_instance_prompt, render_instruction_prompt, render_relevance_prompt, render_type_prompt,
    GENERATION_HEADER, MAX_INSTRUCTION_WORDS, MIN_INSTRUCTION_WORDS, RELEVANCE_QUESTION,
};
pub use run::{
    run_synthesis, CheckpointSink, Cursor, Fate, NoCheckpoint, RunLog, RunLogEntry, SynthesisError,
    SynthesisHalt, SynthesisState,
};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::rouge::SimilarityIndex;
use crate::task::{
    canonical_label, dedupe_instances, parse_score, Instance, Instruction, Task, TaskId, TaskKind,
    TaskPool, TaskType,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Few-shot instructions per generation prompt.
    pub fewshot_size: usize,
    /// Candidates at or above this ROUGE-L F1 to any pooled instruction are rejected.
    pub novelty_threshold: f64,
    /// Number of generated tasks to reach.
    pub target_count: usize,
    pub relevance_positive_count: usize,
    pub relevance_negative_count: usize,
    pub rng_seed: u64,
    /// File of general (not argumentation-specific) instructions, one per line.
    pub negative_exemplar_file: Option<String>,
    /// When set, this many few-shot slots are drawn from seed instructions
    /// and the rest from generated ones, instead of uniformly from both.
    pub seed_fewshot_count: Option<usize>,
    /// Seed instructions shown per kind in the task-type prompt.
    pub type_exemplars_per_kind: usize,
    /// Seed tasks shown in the instance-generation prompt.
    pub instance_exemplars: usize,
    /// Parsed instances kept per generated task.
    pub max_instances_per_task: usize,
    /// Consecutive iterations without an accepted task before giving up.
    pub max_stalled_iterations: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            fewshot_size: 8,
            novelty_threshold: 0.7,
            target_count: 52_445,
            relevance_positive_count: 6,
            relevance_negative_count: 6,
            rng_seed: 0,
            negative_exemplar_file: None,
            seed_fewshot_count: None,
            type_exemplars_per_kind: 3,
            instance_exemplars: 2,
            max_instances_per_task: 5,
            max_stalled_iterations: 200,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.novelty_threshold > 0.0 && self.novelty_threshold <= 1.0) {
            return Err(format!(
                "novelty threshold {} is not in (0, 1]",
                self.novelty_threshold
            ));
        }
        if self.fewshot_size == 0 {
            return Err("few-shot size must be at least 1".into());
        }
        if self.max_instances_per_task == 0 {
            return Err("max instances per task must be at least 1".into());
        }
        Ok(())
    }
}

/// Why a candidate instruction was excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    NotRelevant,
    TooSimilar { score: f64, nearest_id: String },
    Malformed { detail: String },
    PostprocessFailed { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInstruction {
    pub text: String,
    pub rejected_reason: Option<Rejection>,
    /// Maximum similarity found by the novelty filter, once it ran.
    pub similarity: Option<(f64, Option<String>)>,
}

impl CandidateInstruction {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let rejected_reason =
            malformed_reason(&text).map(|detail| Rejection::Malformed { detail });
        CandidateInstruction {
            text,
            rejected_reason,
            similarity: None,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.rejected_reason.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleFewshotError {
    #[error("the task pool is empty")]
    EmptyPool,
}

fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], n: usize, rng: &mut R) -> Vec<&'a T> {
    let n = n.min(items.len());
    sample(rng, items.len(), n)
        .into_iter()
        .map(|i| &items[i])
        .collect()
}

/// Samples `l` instructions uniformly without replacement from the pool
/// (all of them if the pool is smaller). With `seed_count`, that many come
/// from seed instructions and the rest from generated ones.
pub fn sample_fewshot<R: Rng + ?Sized>(
    pool: &TaskPool,
    l: usize,
    seed_count: Option<usize>,
    rng: &mut R,
) -> Result<Vec<Instruction>, SampleFewshotError> {
    if pool.is_empty() {
        return Err(SampleFewshotError::EmptyPool);
    }
    let tasks = pool.tasks();
    let picked: Vec<&Task> = match seed_count {
        None => pick(tasks, l, rng),
        Some(k) => {
            let seeds: Vec<&Task> = pool.seeds().collect();
            let generated: Vec<&Task> = pool.generated().collect();
            let from_gen = l.saturating_sub(k).min(generated.len());
            let from_seed = (l - from_gen).min(seeds.len());
            let mut out: Vec<&Task> = pick(&seeds, from_seed, rng).into_iter().copied().collect();
            out.extend(pick(&generated, from_gen, rng).into_iter().copied());
            out.shuffle(rng);
            out
        }
    };
    Ok(picked.into_iter().map(|t| t.instruction.clone()).collect())
}

pub fn instruction_request<S: AsRef<str>>(fewshot: &[S]) -> CompletionRequest {
    CompletionRequest::new(render_instruction_prompt(fewshot))
}

/// Candidates parsed from an instruction-generation completion, with
/// malformed ones already marked.
pub fn parse_candidates(completion: &str) -> Vec<CandidateInstruction> {
    parse_numbered_list(completion)
        .into_iter()
        .map(CandidateInstruction::new)
        .collect()
}

/// Prompts the model with the few-shot list and parses new instructions.
pub fn generate_instructions<B: CompletionBackend + ?Sized>(
    backend: &B,
    fewshot: &[Instruction],
) -> Result<Vec<CandidateInstruction>, BackendError> {
    let texts: Vec<&str> = fewshot.iter().map(|i| i.text.as_str()).collect();
    let result = backend.complete(&instruction_request(&texts))?;
    Ok(parse_candidates(&result.text))
}

/// Relevance request for one candidate with freshly sampled, shuffled
/// positive and negative exemplars.
pub fn relevance_request<R: Rng + ?Sized>(
    candidate: &str,
    positives: &[&str],
    negatives: &[&str],
    config: &SynthesisConfig,
    rng: &mut R,
) -> CompletionRequest {
    let mut exemplars: Vec<(&str, bool)> = pick(positives, config.relevance_positive_count, rng)
        .into_iter()
        .map(|s| (*s, true))
        .collect();
    exemplars.extend(
        pick(negatives, config.relevance_negative_count, rng)
            .into_iter()
            .map(|s| (*s, false)),
    );
    exemplars.shuffle(rng);
    CompletionRequest::new(render_relevance_prompt(candidate, &exemplars)).with_stop("\n")
}

/// Applies the model's relevance verdicts. A failed request marks its
/// candidate malformed unless the error is fatal, which is returned.
fn apply_relevance(
    candidates: &mut [CandidateInstruction],
    alive: &[usize],
    results: Vec<Result<crate::backend::CompletionResult, BackendError>>,
) -> Result<(), BackendError> {
    for (&i, res) in alive.iter().zip(results) {
        match res {
            Ok(r) if parse_relevance(&r.text) => {}
            Ok(_) => candidates[i].rejected_reason = Some(Rejection::NotRelevant),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => {
                candidates[i].rejected_reason = Some(Rejection::Malformed {
                    detail: format!("relevance request failed: {e}"),
                })
            }
        }
    }
    Ok(())
}

/// Asks the relevance question for every live candidate; anything but a
/// leading "yes" marks the candidate not relevant.
pub fn filter_relevance<B: CompletionBackend + ?Sized, R: Rng + ?Sized>(
    backend: &B,
    candidates: &mut [CandidateInstruction],
    positives: &[Instruction],
    negatives: &[String],
    config: &SynthesisConfig,
    rng: &mut R,
) -> Result<(), BackendError> {
    let pos: Vec<&str> = positives.iter().map(|i| i.text.as_str()).collect();
    let neg: Vec<&str> = negatives.iter().map(String::as_str).collect();
    let alive: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].is_alive()).collect();
    let requests: Vec<CompletionRequest> = alive
        .iter()
        .map(|&i| relevance_request(&candidates[i].text, &pos, &neg, config, rng))
        .collect();
    let results = backend.complete_batch(&requests);
    apply_relevance(candidates, &alive, results)
}

/// Novelty filter against an indexed pool. Live candidates are checked in
/// order against the pool plus the candidates accepted before them in the
/// same batch; scores at or above `threshold` mark the candidate too
/// similar. Batch-local matches are reported as `batch:<position>`.
pub fn filter_novelty_indexed(
    candidates: &mut [CandidateInstruction],
    index: &SimilarityIndex,
    ids: &[TaskId],
    threshold: f64,
) {
    let mut batch = SimilarityIndex::new();
    let mut batch_pos: Vec<usize> = Vec::new();
    for (i, c) in candidates.iter_mut().enumerate() {
        if !c.is_alive() {
            continue;
        }
        let (pool_score, pool_at) = index.max_similarity(&c.text);
        let (batch_score, batch_at) = batch.max_similarity(&c.text);
        let (score, nearest) = if batch_at.is_some() && batch_score > pool_score {
            (batch_score.value(), batch_at.map(|k| format!("batch:{}", batch_pos[k])))
        } else {
            (pool_score.value(), pool_at.map(|k| ids[k].to_string()))
        };
        c.similarity = Some((score, nearest.clone()));
        if score >= threshold {
            c.rejected_reason = Some(Rejection::TooSimilar {
                score,
                nearest_id: nearest.unwrap_or_default(),
            });
        } else {
            batch.push(&c.text);
            batch_pos.push(i);
        }
    }
}

/// Novelty filter against every instruction in `pool`.
pub fn filter_novelty(candidates: &mut [CandidateInstruction], pool: &TaskPool, threshold: f64) {
    let index = SimilarityIndex::from_texts(pool.instruction_texts());
    let ids: Vec<TaskId> = pool.tasks().iter().map(|t| t.id().clone()).collect();
    filter_novelty_indexed(candidates, &index, &ids, threshold);
}

/// Seed instructions grouped by kind, up to `per_kind` each.
pub fn type_exemplars<'a, R: Rng + ?Sized>(
    seeds: &[&'a Task],
    per_kind: usize,
    rng: &mut R,
) -> Vec<(TaskKind, Vec<&'a str>)> {
    TaskKind::ALL
        .iter()
        .map(|k| {
            let of_kind: Vec<&Task> = seeds.iter().copied().filter(|t| t.kind() == *k).collect();
            let texts = pick(&of_kind, per_kind, rng)
                .into_iter()
                .map(|t| t.instruction.text.as_str())
                .collect();
            (*k, texts)
        })
        .collect()
}

pub fn type_request(instruction: &str, exemplars: &[(TaskKind, Vec<&str>)]) -> CompletionRequest {
    CompletionRequest::new(render_type_prompt(instruction, exemplars)).with_stop("\n")
}

/// Asks the model for the instruction's task type.
pub fn classify_task_type<B: CompletionBackend + ?Sized>(
    backend: &B,
    instruction: &str,
    exemplars: &[(TaskKind, Vec<&str>)],
) -> Result<TaskKind, BackendError> {
    let r = backend.complete(&type_request(instruction, exemplars))?;
    Ok(parse_task_kind(&r.text))
}

/// Seed tasks of `kind` for the instance prompt, each with its first instance.
pub fn instance_exemplars<'a, R: Rng + ?Sized>(
    seeds: &[&'a Task],
    kind: TaskKind,
    n: usize,
    rng: &mut R,
) -> Vec<(&'a str, &'a Instance)> {
    let of_kind: Vec<&Task> = seeds
        .iter()
        .copied()
        .filter(|t| t.kind() == kind && !t.instances.is_empty())
        .collect();
    pick(&of_kind, n, rng)
        .into_iter()
        .map(|t| (t.instruction.text.as_str(), &t.instances[0]))
        .collect()
}

pub fn instance_request(
    instruction: &str,
    kind: TaskKind,
    exemplars: &[(&str, &Instance)],
) -> CompletionRequest {
    CompletionRequest::new(render_instance_prompt(instruction, kind, exemplars))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("completion has no Output: marker")]
    NoOutputMarker,
    #[error("no valid instances after postprocessing")]
    NoValidInstances,
    #[error("classification instances cover fewer than two labels")]
    SingleLabel,
}

/// Task type and instances derived from an instance completion.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstances {
    pub task_type: TaskType,
    pub instances: Vec<Instance>,
}

/// Parses and cleans instance blocks for a task of `kind`.
///
/// Instances are deduplicated; conflicting ones are dropped. The label set
/// of a classification task is the set of distinct canonical outputs; the
/// range of a regression task is the span of its numeric outputs widened
/// to integers. At most `max_instances` are kept.
pub fn postprocess_instances(
    completion: &str,
    kind: TaskKind,
    max_instances: usize,
) -> Result<GeneratedInstances, InstanceError> {
    let parsed = parse_instance_blocks(completion).ok_or(InstanceError::NoOutputMarker)?;
    let mut instances: Vec<Instance> = parsed
        .into_iter()
        .map(|i| Instance::new(i.input.trim(), i.output.trim()))
        .filter(|i| !i.output.is_empty())
        .filter(|i| kind != TaskKind::Regression || parse_score(&i.output).is_some())
        .collect();
    instances = dedupe_instances(instances);
    if instances.is_empty() {
        return Err(InstanceError::NoValidInstances);
    }
    let task_type = match kind {
        TaskKind::Classification => {
            let mut labels: Vec<String> = Vec::new();
            for i in &instances {
                let c = canonical_label(&i.output);
                if !labels.contains(&c) {
                    labels.push(c);
                }
            }
            if labels.len() < 2 {
                return Err(InstanceError::SingleLabel);
            }
            TaskType::Classification { labels }
        }
        TaskKind::Regression => {
            let values: Vec<f64> = instances
                .iter()
                .filter_map(|i| parse_score(&i.output))
                .collect();
            let lo = libm::floor(values.iter().copied().fold(f64::INFINITY, f64::min));
            let mut hi = libm::ceil(values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            if hi <= lo {
                hi = lo + 1.0;
            }
            TaskType::Regression { min: lo, max: hi }
        }
        TaskKind::Generation => TaskType::Generation,
    };
    instances.truncate(max_instances);
    Ok(GeneratedInstances {
        task_type,
        instances,
    })
}

/// Prompts for instances of an instruction whose kind is known.
pub fn generate_instances<B: CompletionBackend + ?Sized>(
    backend: &B,
    instruction: &str,
    kind: TaskKind,
    exemplars: &[(&str, &Instance)],
    max_instances: usize,
) -> Result<GeneratedInstances, InstanceError> {
    let r = backend.complete(&instance_request(instruction, kind, exemplars))?;
    postprocess_instances(&r.text, kind, max_instances)
}
