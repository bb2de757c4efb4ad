//! Tasks, instances, task types and the append-only task pool.
//!
//! A task pairs a natural-language instruction with one or more
//! input/output instances. Seed tasks come from curated corpora; generated
//! tasks are produced by the synthesis loop and appended to the same pool.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Opaque unique identifier of a task (and its instruction).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Generated,
}

/// The three main research areas of computational argumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Area {
    Mining,
    Assessment,
    Generation,
}

impl Area {
    pub const ALL: [Area; 3] = [Area::Mining, Area::Assessment, Area::Generation];

    pub fn as_str(self) -> &'static str {
        match self {
            Area::Mining => "mining",
            Area::Assessment => "assessment",
            Area::Generation => "generation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub id: TaskId,
    pub text: String,
    pub provenance: Provenance,
    pub area: Option<Area>,
    pub source_dataset: Option<String>,
}

/// One input/output pair. Input-free tasks use an empty input string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub input: String,
    pub output: String,
}

impl Instance {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        Instance {
            input: input.into(),
            output: output.into(),
        }
    }
}

/// Output kind of a task together with its label set or numeric range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskType {
    Classification { labels: Vec<String> },
    Regression { min: f64, max: f64 },
    Generation,
}

impl TaskType {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskType::Classification { .. } => TaskKind::Classification,
            TaskType::Regression { .. } => TaskKind::Regression,
            TaskType::Generation => TaskKind::Generation,
        }
    }
}

/// Task type without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
    Generation,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [
        TaskKind::Classification,
        TaskKind::Regression,
        TaskKind::Generation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
            TaskKind::Generation => "generation",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TaskRecord", into = "TaskRecord")]
pub struct Task {
    pub instruction: Instruction,
    pub task_type: TaskType,
    pub instances: Vec<Instance>,
}

impl Task {
    pub fn id(&self) -> &TaskId {
        &self.instruction.id
    }

    pub fn kind(&self) -> TaskKind {
        self.task_type.kind()
    }

    pub fn is_generated(&self) -> bool {
        self.instruction.provenance == Provenance::Generated
    }

    /// Same task with a different instance list.
    pub fn with_instances(&self, instances: Vec<Instance>) -> Task {
        Task {
            instruction: self.instruction.clone(),
            task_type: self.task_type.clone(),
            instances,
        }
    }
}

/// Flat on-disk shape of a task. Field order is the file format's order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: TaskId,
    pub instruction: String,
    pub provenance: Provenance,
    pub area: Option<Area>,
    pub source_dataset: Option<String>,
    pub task_type: TaskType,
    pub instances: Vec<Instance>,
}

impl From<TaskRecord> for Task {
    fn from(r: TaskRecord) -> Self {
        Task {
            instruction: Instruction {
                id: r.id,
                text: r.instruction,
                provenance: r.provenance,
                area: r.area,
                source_dataset: r.source_dataset,
            },
            task_type: r.task_type,
            instances: r.instances,
        }
    }
}

impl From<Task> for TaskRecord {
    fn from(t: Task) -> Self {
        TaskRecord {
            id: t.instruction.id,
            instruction: t.instruction.text,
            provenance: t.instruction.provenance,
            area: t.instruction.area,
            source_dataset: t.instruction.source_dataset,
            task_type: t.task_type,
            instances: t.instances,
        }
    }
}

/// Canonical form of a class label: surrounding whitespace trimmed, lowercased
/// character by character (no context-sensitive casing rules).
pub fn canonical_label(label: &str) -> String {
    label.trim().chars().flat_map(char::to_lowercase).collect()
}

/// Parses a regression output as a finite real.
pub fn parse_score(output: &str) -> Option<f64> {
    output.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// One violated task invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("instruction text is empty")]
    EmptyInstruction,
    #[error("seed task has no source dataset")]
    SeedWithoutSource,
    #[error("task has no instances")]
    NoInstances,
    #[error("instance {index} has an empty output")]
    EmptyOutput { index: usize },
    #[error("classification task needs at least two labels, found {found}")]
    TooFewLabels { found: usize },
    #[error("label {label:?} appears more than once after canonicalization")]
    DuplicateLabel { label: String },
    #[error("regression range [{min}, {max}] is not a finite interval with min < max")]
    InvalidRange { min: f64, max: f64 },
    #[error("instance {index} output {output:?} is not one of the task labels")]
    UnknownLabel { index: usize, output: String },
    #[error("instance {index} output {output:?} is not a number")]
    NotANumber { index: usize, output: String },
    #[error("instance {index} value {value} lies outside [{min}, {max}]")]
    OutOfRange {
        index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("instance {index} duplicates an earlier instance")]
    DuplicateInstance { index: usize },
    #[error("input {input:?} is mapped to {outputs} different outputs")]
    ConflictingOutputs { input: String, outputs: usize },
}

/// Checks every task invariant and reports each violation found.
pub fn validate_task(task: &Task) -> Vec<Violation> {
    let mut out = Vec::new();
    let ins = &task.instruction;
    if ins.text.trim().is_empty() {
        out.push(Violation::EmptyInstruction);
    }
    if ins.provenance == Provenance::Seed
        && ins.source_dataset.as_deref().is_none_or(|s| s.trim().is_empty())
    {
        out.push(Violation::SeedWithoutSource);
    }
    if task.instances.is_empty() {
        out.push(Violation::NoInstances);
    }
    for (index, inst) in task.instances.iter().enumerate() {
        if inst.output.trim().is_empty() {
            out.push(Violation::EmptyOutput { index });
        }
    }

    match &task.task_type {
        TaskType::Classification { labels } => {
            let mut canon = BTreeSet::new();
            for l in labels {
                let c = canonical_label(l);
                if !canon.insert(c.clone()) {
                    out.push(Violation::DuplicateLabel { label: c });
                }
            }
            if labels.len() < 2 {
                out.push(Violation::TooFewLabels {
                    found: labels.len(),
                });
            }
            for (index, inst) in task.instances.iter().enumerate() {
                if inst.output.trim().is_empty() {
                    continue;
                }
                if !canon.contains(&canonical_label(&inst.output)) {
                    out.push(Violation::UnknownLabel {
                        index,
                        output: inst.output.clone(),
                    });
                }
            }
        }
        TaskType::Regression { min, max } => {
            let (min, max) = (*min, *max);
            let range_ok = min.is_finite() && max.is_finite() && min < max;
            if !range_ok {
                out.push(Violation::InvalidRange { min, max });
            }
            for (index, inst) in task.instances.iter().enumerate() {
                if inst.output.trim().is_empty() {
                    continue;
                }
                match parse_score(&inst.output) {
                    None => out.push(Violation::NotANumber {
                        index,
                        output: inst.output.clone(),
                    }),
                    Some(value) if range_ok && (value < min || value > max) => {
                        out.push(Violation::OutOfRange {
                            index,
                            value,
                            min,
                            max,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        TaskType::Generation => {}
    }

    let mut seen_pairs: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut outputs_by_input: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut conflict_order: Vec<&str> = Vec::new();
    for (index, inst) in task.instances.iter().enumerate() {
        if !seen_pairs.insert((inst.input.as_str(), inst.output.as_str())) {
            out.push(Violation::DuplicateInstance { index });
        }
        let outs = outputs_by_input.entry(inst.input.as_str()).or_default();
        outs.insert(inst.output.as_str());
        if outs.len() == 2 {
            conflict_order.push(inst.input.as_str());
        }
    }
    for input in conflict_order {
        out.push(Violation::ConflictingOutputs {
            input: input.to_string(),
            outputs: outputs_by_input[input].len(),
        });
    }
    out
}

/// Collapses exact duplicates to their first occurrence and drops every
/// instance whose input maps to more than one distinct output.
pub fn dedupe_instances(instances: Vec<Instance>) -> Vec<Instance> {
    let mut outputs_by_input: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for inst in &instances {
        outputs_by_input
            .entry(inst.input.as_str())
            .or_default()
            .insert(inst.output.as_str());
    }
    let conflicting: BTreeSet<String> = outputs_by_input
        .into_iter()
        .filter(|(_, outs)| outs.len() > 1)
        .map(|(input, _)| input.to_string())
        .collect();

    let mut seen: BTreeSet<Instance> = BTreeSet::new();
    instances
        .into_iter()
        .filter(|inst| !conflicting.contains(&inst.input) && seen.insert(inst.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoolError {
    #[error("task id {0} is already in the pool")]
    DuplicateId(TaskId),
    #[error("task {id} is invalid: {} violation(s)", violations.len())]
    InvalidTask {
        id: TaskId,
        violations: Vec<Violation>,
    },
}

/// Append-only collection of tasks with an index of instruction texts.
///
/// Mutation is single-writer; cloning yields an independent snapshot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskPool {
    tasks: Vec<Task>,
    instruction_index: Vec<String>,
    ids: BTreeMap<TaskId, usize>,
}

impl TaskPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a pool from tasks, rejecting the first invalid or duplicate one.
    pub fn from_tasks(tasks: impl IntoIterator<Item = Task>) -> Result<Self, PoolError> {
        let mut pool = TaskPool::new();
        for t in tasks {
            pool.add(t)?;
        }
        Ok(pool)
    }

    pub fn add(&mut self, task: Task) -> Result<(), PoolError> {
        if self.ids.contains_key(task.id()) {
            return Err(PoolError::DuplicateId(task.id().clone()));
        }
        let violations = validate_task(&task);
        if !violations.is_empty() {
            return Err(PoolError::InvalidTask {
                id: task.id().clone(),
                violations,
            });
        }
        self.ids.insert(task.id().clone(), self.tasks.len());
        self.instruction_index.push(task.instruction.text.clone());
        self.tasks.push(task);
        Ok(())
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn into_tasks(self) -> Vec<Task> {
        self.tasks
    }

    /// Instruction texts in insertion order.
    pub fn instruction_texts(&self) -> &[String] {
        &self.instruction_index
    }

    pub fn get(&self, id: &TaskId) -> Option<&Task> {
        self.ids.get(id).map(|&i| &self.tasks[i])
    }

    pub fn contains(&self, id: &TaskId) -> bool {
        self.ids.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn generated_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.is_generated()).count()
    }

    pub fn seeds(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(|t| !t.is_generated())
    }

    pub fn generated(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(|t| t.is_generated())
    }
}
