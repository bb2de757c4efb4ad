//! Review sheets for manual quality checks of generated tasks.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::task::{Instance, Task, TaskId, TaskType};

pub const DEFAULT_REVIEW_SAMPLE: usize = 200;

/// Question id and wording of the three review questions.
pub const REVIEW_QUESTIONS: [(&str, &str); 3] = [
    ("Q1", "Does the instruction describe a valid CA task?"),
    ("Q2", "Is the input appropriate for the instruction?"),
    (
        "Q3",
        "Is the output a correct and acceptable response to the instruction and input?",
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub question_id: String,
    pub question: String,
    pub answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub task_id: TaskId,
    pub instruction: String,
    pub task_type: TaskType,
    pub instances: Vec<Instance>,
    pub judgments: Vec<Judgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReviewError {
    #[error("the pool has no generated tasks")]
    NoGeneratedTasks,
}

/// Uniform sample of up to `sample_size` generated tasks, each with three
/// empty judgment slots.
pub fn export_review_sheet<R: Rng + ?Sized>(
    tasks: &[Task],
    sample_size: usize,
    rng: &mut R,
) -> Result<Vec<ReviewRecord>, ReviewError> {
    let generated: Vec<&Task> = tasks.iter().filter(|t| t.is_generated()).collect();
    if generated.is_empty() {
        return Err(ReviewError::NoGeneratedTasks);
    }
    let n = sample_size.min(generated.len());
    let mut picked = sample(rng, generated.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| {
            let t = generated[i];
            ReviewRecord {
                task_id: t.id().clone(),
                instruction: t.instruction.text.clone(),
                task_type: t.task_type.clone(),
                instances: t.instances.clone(),
                judgments: REVIEW_QUESTIONS
                    .iter()
                    .map(|(id, q)| Judgment {
                        question_id: (*id).into(),
                        question: (*q).into(),
                        answer: None,
                    })
                    .collect(),
            }
        })
        .collect())
}
