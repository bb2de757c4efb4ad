//! Guided decoding, task metrics, and leaderboards.

mod automaton;
mod metrics;
mod rank;

pub use automaton::{compile_automaton, decode, AutomatonError, DecodeMatch, Decoded, Dfa, LabelAutomaton, Language};
pub use metrics::{mase, micro_f1, rouge_l_metric, Metric, MetricError};
pub use rank::{average_ranks, mean_rank, Leaderboard, LeaderboardRow, ModelScores, RankError, TaskScore};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{CompletionBackend, CompletionRequest};
use crate::curation::PromptTemplate;
use crate::task::{canonical_label, parse_score, Instance, Task, TaskId, TaskKind, TaskType};

/// Upper bound on new tokens for open generation.
pub const GENERATION_MAX_NEW_TOKENS: u32 = 512;

/// One model answer with its decoded value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: TaskId,
    pub instance_index: usize,
    pub raw_output: String,
    pub decoded: Option<Decoded>,
    pub decode_failed: bool,
}

/// A task with the instances sampled for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub task: Task,
    pub instances: Vec<Instance>,
}

/// Which decoded-failure policy was applied to a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Failed decodes count as wrong answers.
    CountAsWrong,
    /// Failed decodes are replaced by the midpoint of the task range.
    MidpointImputed,
    /// Failed requests contribute an empty output.
    EmptyOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task_id: TaskId,
    pub kind: TaskKind,
    pub dataset: Option<String>,
    pub metric: Metric,
    /// `None` when the metric is undefined on the sampled gold values.
    pub value: Option<f64>,
    pub instances: usize,
    pub failures: usize,
    pub policy: FailurePolicy,
    pub note: Option<String>,
    #[serde(skip)]
    pub predictions: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("task {task}: {source}")]
    Automaton {
        task: TaskId,
        #[source]
        source: AutomatonError,
    },
}

/// Prompt sent to the model for one instance: the training template
/// without the response.
pub fn eval_prompt(template: &PromptTemplate, task: &Task, instance: &Instance) -> String {
    template.render_prompt(&task.instruction.text, &instance.input)
}

/// Builds the request for one instance.
pub fn eval_request(template: &PromptTemplate, task: &Task, instance: &Instance) -> CompletionRequest {
    let req = CompletionRequest::new(eval_prompt(template, task, instance));
    match task.kind() {
        TaskKind::Generation => req.with_max_new_tokens(GENERATION_MAX_NEW_TOKENS),
        _ => req,
    }
}

/// Queries `backend` for every sampled instance and scores each task with
/// the metric matching its type. Backend failures are recorded per instance.
pub fn evaluate_model<B: CompletionBackend + ?Sized>(
    backend: &B,
    tasks: &[EvalTask],
    template: &PromptTemplate,
) -> Result<Vec<TaskEvaluation>, EvalError> {
    tasks
        .iter()
        .map(|et| evaluate_task(backend, et, template))
        .collect()
}

fn evaluate_task<B: CompletionBackend + ?Sized>(
    backend: &B,
    et: &EvalTask,
    template: &PromptTemplate,
) -> Result<TaskEvaluation, EvalError> {
    let task = &et.task;
    let automaton = match &task.task_type {
        TaskType::Generation => None,
        tt => Some(compile_automaton(tt).map_err(|source| EvalError::Automaton {
            task: task.id().clone(),
            source,
        })?),
    };
    let requests: Vec<CompletionRequest> = et
        .instances
        .iter()
        .map(|i| eval_request(template, task, i))
        .collect();
    let results = backend.complete_batch(&requests);

    let mut predictions = Vec::with_capacity(results.len());
    for (index, res) in results.into_iter().enumerate() {
        let (raw_output, ok) = match res {
            Ok(r) => (r.text, true),
            Err(_) => (String::new(), false),
        };
        let decoded = match &automaton {
            Some(a) if ok => a.decode(&raw_output).map(|m| m.value),
            Some(_) => None,
            None if ok => Some(Decoded::Text(raw_output.clone())),
            None => None,
        };
        predictions.push(PredictionRecord {
            task_id: task.id().clone(),
            instance_index: index,
            raw_output,
            decode_failed: decoded.is_none(),
            decoded,
        });
    }
    let failures = predictions.iter().filter(|p| p.decode_failed).count();
    let metric = Metric::for_kind(task.kind());

    let (value, policy, note) = match &task.task_type {
        TaskType::Classification { .. } => {
            let gold: Vec<String> = et.instances.iter().map(|i| canonical_label(&i.output)).collect();
            let v = micro_f1(&predictions, &gold).ok();
            (v, FailurePolicy::CountAsWrong, None)
        }
        TaskType::Regression { min, max } => {
            let midpoint = (min + max) / 2.0;
            let preds: Vec<f64> = predictions
                .iter()
                .map(|p| p.decoded.as_ref().and_then(Decoded::as_number).unwrap_or(midpoint))
                .collect();
            let gold: Vec<f64> = et
                .instances
                .iter()
                .map(|i| parse_score(&i.output).unwrap_or(midpoint))
                .collect();
            match mase(&preds, &gold) {
                Ok(v) => (Some(v), FailurePolicy::MidpointImputed, None),
                Err(e) => (None, FailurePolicy::MidpointImputed, Some(e.to_string())),
            }
        }
        TaskType::Generation => {
            let gold: Vec<String> = et.instances.iter().map(|i| i.output.clone()).collect();
            (rouge_l_metric(&predictions, &gold).ok(), FailurePolicy::EmptyOutput, None)
        }
    };
    let note = note.or_else(|| (failures > 0).then(|| format!("{failures} failed decode(s)")));

    Ok(TaskEvaluation {
        task_id: task.id().clone(),
        kind: task.kind(),
        dataset: task.instruction.source_dataset.clone(),
        metric,
        value,
        instances: et.instances.len(),
        failures,
        policy,
        note,
        predictions,
    })
}

/// Collects one model's defined task values for ranking.
pub fn model_scores(model: &str, evaluations: &[TaskEvaluation]) -> ModelScores {
    ModelScores {
        model: model.into(),
        scores: evaluations
            .iter()
            .filter_map(|e| {
                e.value.map(|value| {
                    (
                        e.task_id.clone(),
                        TaskScore {
                            metric: e.metric,
                            value,
                            dataset: e.dataset.clone(),
                        },
                    )
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, CompletionResult};
    use crate::curation::ALPACA;
    use crate::task::{Instruction, Provenance};
    use alloc::collections::BTreeMap;
    use alloc::vec;

    struct Scripted(BTreeMap<String, Result<String, ()>>);

    impl CompletionBackend for Scripted {
        fn complete(&self, r: &CompletionRequest) -> Result<CompletionResult, BackendError> {
            match self.0.get(&r.prompt) {
                Some(Ok(t)) => Ok(CompletionResult::stop(t.clone())),
                _ => Err(BackendError::Timeout { attempts: 3 }),
            }
        }
    }

    fn task(id: &str, tt: TaskType, instances: Vec<Instance>) -> Task {
        Task {
            instruction: Instruction {
                id: TaskId::new(id),
                text: format!("Do {id}"),
                provenance: Provenance::Seed,
                area: None,
                source_dataset: Some("ds".into()),
            },
            task_type: tt,
            instances,
        }
    }

    fn script(et: &EvalTask, answers: &[Result<&str, ()>]) -> Scripted {
        Scripted(
            et.instances
                .iter()
                .zip(answers)
                .map(|(i, a)| (eval_prompt(&ALPACA, &et.task, i), a.map(|s| s.to_string())))
                .collect(),
        )
    }

    #[test]
    fn oracle_mock_scores_perfectly() {
        let insts = vec![Instance::new("a", "Pro"), Instance::new("b", "con")];
        let t = task("c", TaskType::Classification { labels: vec!["pro".into(), "con".into()] }, insts.clone());
        let et = EvalTask { task: t, instances: insts };
        let b = script(&et, &[Ok("pro, clearly"), Ok("Con")]);
        let r = evaluate_model(&b, &[et], &ALPACA).unwrap();
        assert_eq!(r[0].value, Some(1.0));
        assert_eq!(r[0].metric, Metric::MicroF1);
        assert_eq!(r[0].failures, 0);
    }

    #[test]
    fn timeout_is_recorded_and_run_continues() {
        let insts = vec![Instance::new("a", "1"), Instance::new("b", "5"), Instance::new("c", "3")];
        let t = task("r", TaskType::Regression { min: 1.0, max: 5.0 }, insts.clone());
        let et = EvalTask { task: t, instances: insts };
        let b = script(&et, &[Ok("1"), Ok("5"), Err(())]);
        let r = evaluate_model(&b, &[et], &ALPACA).unwrap();
        assert_eq!(r[0].failures, 1);
        assert!(r[0].predictions[2].decode_failed);
        // Imputed midpoint 3 equals the gold value, so the error is zero.
        assert_eq!(r[0].value, Some(0.0));
        assert_eq!(r[0].policy, FailurePolicy::MidpointImputed);
    }

    #[test]
    fn generation_uses_rouge_and_token_cap() {
        let insts = vec![Instance::new("", "the cat sat on the mat")];
        let t = task("g", TaskType::Generation, insts.clone());
        let et = EvalTask { task: t, instances: insts };
        assert_eq!(
            eval_request(&ALPACA, &et.task, &et.instances[0]).overrides.max_new_tokens,
            Some(512)
        );
        let b = script(&et, &[Ok("the cat sat")]);
        let r = evaluate_model(&b, &[et], &ALPACA).unwrap();
        let expected = crate::rouge::rouge_l_f1("the cat sat", "the cat sat on the mat").value();
        assert_eq!(r[0].value, Some(expected));
    }
}
