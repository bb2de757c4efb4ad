//! The resumable synthesis loop and its run log.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    filter_novelty_indexed, filter_relevance, instance_exemplars, instance_request,
    instruction_request, parse_candidates, parse_task_kind, postprocess_instances, sample_fewshot,
    type_exemplars, type_request, CandidateInstruction, Rejection, SynthesisConfig,
};
use crate::backend::{BackendError, CompletionBackend, ReplayCursor};
use crate::rng::indexed_substream;
use crate::rouge::SimilarityIndex;
use crate::task::{Instruction, Provenance, Task, TaskId, TaskKind, TaskPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Accepted,
    NotRelevant,
    TooSimilar,
    Malformed,
    PostprocessFailed,
}

/// One candidate instruction and what happened to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub candidate_text: String,
    pub fate: Fate,
    pub similarity_score: Option<f64>,
    pub nearest_instruction_id: Option<String>,
    pub task_id: Option<TaskId>,
    pub task_kind: Option<TaskKind>,
    /// Loop iteration that produced the candidate.
    pub iteration: u64,
    /// Position of the entry in the whole log.
    pub sequence: u64,
    pub detail: Option<String>,
}

pub type RunLog = Vec<RunLogEntry>;

/// Where a run stands, enough to continue it after a restart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    /// Next iteration to run.
    pub iteration: u64,
    pub generated: usize,
    /// Consecutive iterations without an accepted task.
    #[serde(default)]
    pub stalled: usize,
    #[serde(default)]
    pub replay: Option<ReplayCursor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisState {
    pub pool: TaskPool,
    pub log: RunLog,
    pub cursor: Cursor,
}

impl SynthesisState {
    /// Fresh state over a seed pool.
    pub fn new(pool: TaskPool) -> Self {
        let generated = pool.generated_count();
        SynthesisState {
            pool,
            log: Vec::new(),
            cursor: Cursor {
                generated,
                ..Cursor::default()
            },
        }
    }
}

/// Receives the state after every iteration and once more at the end of
/// the run. Implementations may write only what changed since the last call.
pub trait CheckpointSink {
    fn checkpoint(&mut self, state: &SynthesisState) -> Result<(), String>;
}

/// Sink that discards checkpoints.
pub struct NoCheckpoint;

impl CheckpointSink for NoCheckpoint {
    fn checkpoint(&mut self, _: &SynthesisState) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("the pool is empty")]
    EmptyPool,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no task accepted in {0} consecutive iterations")]
    Stalled(usize),
    #[error("checkpoint failed: {0}")]
    Checkpoint(String),
}

/// A run that stopped early, with the last consistent state.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisHalt {
    pub error: SynthesisError,
    pub state: Box<SynthesisState>,
}

impl core::fmt::Display for SynthesisHalt {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} (after {} generated tasks)",
            self.error, self.state.cursor.generated
        )
    }
}

fn fate_of(c: &CandidateInstruction) -> (Fate, Option<String>) {
    match &c.rejected_reason {
        None => (Fate::Accepted, None),
        Some(Rejection::NotRelevant) => (Fate::NotRelevant, None),
        Some(Rejection::TooSimilar { .. }) => (Fate::TooSimilar, None),
        Some(Rejection::Malformed { detail }) => (Fate::Malformed, Some(detail.clone())),
        Some(Rejection::PostprocessFailed { detail }) => {
            (Fate::PostprocessFailed, Some(detail.clone()))
        }
    }
}

/// Outcome of the candidate-level steps for one surviving candidate.
struct Built {
    index: usize,
    kind: TaskKind,
    result: Result<super::GeneratedInstances, String>,
}

/// Runs the loop until the pool holds `config.target_count` generated
/// tasks.
///
/// Each iteration draws its randomness from its own substream, so a run
/// resumed from a checkpointed state (with the backend's replay cursor
/// restored) continues exactly as the uninterrupted run would. State is
/// only modified once an iteration's model calls have all returned, so the
/// state carried by a halt is never half-updated.
pub fn run_synthesis<B, S>(
    backend: &B,
    mut state: SynthesisState,
    config: &SynthesisConfig,
    negatives: &[String],
    sink: &mut S,
) -> Result<SynthesisState, SynthesisHalt>
where
    B: CompletionBackend + ?Sized,
    S: CheckpointSink + ?Sized,
{
    macro_rules! halt {
        ($e:expr) => {
            return Err(SynthesisHalt {
                error: $e,
                state: Box::new(state),
            })
        };
    }
    if let Err(e) = config.validate() {
        halt!(SynthesisError::Config(e));
    }
    if state.pool.is_empty() {
        halt!(SynthesisError::EmptyPool);
    }
    if let Some(replay) = &state.cursor.replay {
        backend.restore_replay_cursor(replay);
    }
    let seeds: Vec<Task> = state.pool.seeds().cloned().collect();
    let seed_refs: Vec<&Task> = seeds.iter().collect();
    let positives: Vec<Instruction> = seeds.iter().map(|t| t.instruction.clone()).collect();
    let mut index = SimilarityIndex::from_texts(state.pool.instruction_texts());
    let mut ids: Vec<TaskId> = state.pool.tasks().iter().map(|t| t.id().clone()).collect();

    while state.cursor.generated < config.target_count {
        if state.cursor.stalled >= config.max_stalled_iterations {
            halt!(SynthesisError::Stalled(state.cursor.stalled));
        }
        let iteration = state.cursor.iteration;
        let mut rng = indexed_substream(config.rng_seed, "synthesis", iteration);

        let fewshot = match sample_fewshot(
            &state.pool,
            config.fewshot_size,
            config.seed_fewshot_count,
            &mut rng,
        ) {
            Ok(f) => f,
            Err(_) => halt!(SynthesisError::EmptyPool),
        };
        let texts: Vec<&str> = fewshot.iter().map(|i| i.text.as_str()).collect();
        let completion = match backend.complete(&instruction_request(&texts)) {
            Ok(c) => c,
            Err(e) => halt!(e.into()),
        };
        let mut candidates = parse_candidates(&completion.text);

        if let Err(e) = filter_relevance(
            backend,
            &mut candidates,
            &positives,
            negatives,
            config,
            &mut rng,
        ) {
            halt!(e.into());
        }
        filter_novelty_indexed(&mut candidates, &index, &ids, config.novelty_threshold);

        let survivors: Vec<usize> = (0..candidates.len())
            .filter(|&i| candidates[i].is_alive())
            .collect();
        let kind_requests: Vec<_> = survivors
            .iter()
            .map(|&i| {
                let ex = type_exemplars(&seed_refs, config.type_exemplars_per_kind, &mut rng);
                type_request(&candidates[i].text, &ex)
            })
            .collect();
        let mut kinds: Vec<(usize, TaskKind)> = Vec::new();
        for (&i, res) in survivors.iter().zip(backend.complete_batch(&kind_requests)) {
            match res {
                Ok(r) => kinds.push((i, parse_task_kind(&r.text))),
                Err(e) if e.is_fatal() => halt!(e.into()),
                Err(e) => {
                    candidates[i].rejected_reason = Some(Rejection::PostprocessFailed {
                        detail: format!("task type request failed: {e}"),
                    })
                }
            }
        }
        let instance_requests: Vec<_> = kinds
            .iter()
            .map(|&(i, kind)| {
                let ex = instance_exemplars(&seed_refs, kind, config.instance_exemplars, &mut rng);
                instance_request(&candidates[i].text, kind, &ex)
            })
            .collect();
        let mut built: Vec<Built> = Vec::new();
        for (&(index, kind), res) in kinds.iter().zip(backend.complete_batch(&instance_requests)) {
            let result = match res {
                Ok(r) => postprocess_instances(&r.text, kind, config.max_instances_per_task)
                    .map_err(|e| e.to_string()),
                Err(e) if e.is_fatal() => halt!(e.into()),
                Err(e) => Err(format!("instance request failed: {e}")),
            };
            built.push(Built { index, kind, result });
        }

        // Single-writer section: accept in candidate order.
        let mut accepted_kind: Vec<Option<(TaskId, TaskKind)>> = alloc::vec![None; candidates.len()];
        let mut cut = candidates.len();
        for b in built {
            if state.cursor.generated >= config.target_count {
                cut = b.index;
                break;
            }
            let generated = match b.result {
                Ok(g) => g,
                Err(detail) => {
                    candidates[b.index].rejected_reason =
                        Some(Rejection::PostprocessFailed { detail });
                    continue;
                }
            };
            let id = next_id(&state.pool, state.cursor.generated);
            let task = Task {
                instruction: Instruction {
                    id: id.clone(),
                    text: candidates[b.index].text.clone(),
                    provenance: Provenance::Generated,
                    area: None,
                    source_dataset: None,
                },
                task_type: generated.task_type,
                instances: generated.instances,
            };
            match state.pool.add(task) {
                Ok(()) => {
                    index.push(&candidates[b.index].text);
                    ids.push(id.clone());
                    state.cursor.generated += 1;
                    accepted_kind[b.index] = Some((id, b.kind));
                }
                Err(e) => {
                    candidates[b.index].rejected_reason = Some(Rejection::PostprocessFailed {
                        detail: e.to_string(),
                    })
                }
            }
        }
        // Candidates past the point where the target was reached are
        // dropped unlogged; the run ends with this iteration.
        let mut accepted_now = 0;
        for (i, c) in candidates.iter().enumerate().take(cut) {
            let (fate, detail) = fate_of(c);
            let (similarity_score, nearest_instruction_id) = match &c.similarity {
                Some((s, n)) => (Some(*s), n.clone()),
                None => (None, None),
            };
            let (task_id, task_kind) = match accepted_kind[i].clone() {
                Some((id, k)) => {
                    accepted_now += 1;
                    (Some(id), Some(k))
                }
                None => (None, None),
            };
            let sequence = state.log.len() as u64;
            state.log.push(RunLogEntry {
                candidate_text: c.text.clone(),
                fate,
                similarity_score,
                nearest_instruction_id,
                task_id,
                task_kind,
                iteration,
                sequence,
                detail,
            });
        }
        state.cursor.iteration += 1;
        state.cursor.replay = backend.replay_cursor();
        if accepted_now == 0 {
            state.cursor.stalled += 1;
        } else {
            state.cursor.stalled = 0;
        }
        if let Err(e) = sink.checkpoint(&state) {
            halt!(SynthesisError::Checkpoint(e));
        }
    }
    if let Err(e) = sink.checkpoint(&state) {
        halt!(SynthesisError::Checkpoint(e));
    }
    Ok(state)
}

/// First free `gen-NNNNNN` id at or after the generated count.
fn next_id(pool: &TaskPool, generated: usize) -> TaskId {
    let mut n = generated + 1;
    loop {
        let id = TaskId::new(format!("gen-{n:06}"));
        if !pool.contains(&id) {
            return id;
        }
        n += 1;
    }
}
