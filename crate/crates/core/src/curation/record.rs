//! Prompt templates and loss-masked training records.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::task::{Instance, TaskId};

/// Three-block instruction/input/response prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub preamble_with_input: &'static str,
    pub preamble_without_input: &'static str,
    pub instruction_header: &'static str,
    pub input_header: &'static str,
    pub response_header: &'static str,
    /// Appended after the response in training text.
    pub terminator: &'static str,
}

pub const ALPACA: PromptTemplate = PromptTemplate {
    name: "alpaca",
    preamble_with_input: "Below is an instruction that describes a task, paired with an input that provides further context. Write a response that appropriately completes the request.",
    preamble_without_input: "Below is an instruction that describes a task. Write a response that appropriately completes the request.",
    instruction_header: "### Instruction:",
    input_header: "### Input:",
    response_header: "### Response:",
    terminator: "</s>",
};

pub const TEMPLATES: &[PromptTemplate] = &[ALPACA];

impl PromptTemplate {
    pub fn by_name(name: &str) -> Option<&'static PromptTemplate> {
        TEMPLATES.iter().find(|t| t.name == name)
    }

    /// Everything up to and including the response header; the model's
    /// answer starts right after it.
    pub fn render_prompt(&self, instruction: &str, input: &str) -> String {
        let mut s = String::new();
        if input.is_empty() {
            s.push_str(self.preamble_without_input);
        } else {
            s.push_str(self.preamble_with_input);
        }
        s.push_str("\n\n");
        s.push_str(self.instruction_header);
        s.push('\n');
        s.push_str(instruction);
        s.push_str("\n\n");
        if !input.is_empty() {
            s.push_str(self.input_header);
            s.push('\n');
            s.push_str(input);
            s.push_str("\n\n");
        }
        s.push_str(self.response_header);
        s.push('\n');
        s
    }

    pub fn render_record(
        &self,
        instruction: &str,
        instance: &Instance,
        source_task_id: &TaskId,
        source: &str,
    ) -> TrainingRecord {
        let mut rendered_text = self.render_prompt(instruction, &instance.input);
        let loss_start_offset = rendered_text.chars().count();
        rendered_text.push_str(&instance.output);
        rendered_text.push_str(self.terminator);
        TrainingRecord {
            rendered_text,
            loss_start_offset,
            source_task_id: source_task_id.clone(),
            source: source.into(),
        }
    }
}

/// Rendered prompt and target text. Training loss applies only from
/// `loss_start_offset` (a character index) onwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub rendered_text: String,
    pub loss_start_offset: usize,
    pub source_task_id: TaskId,
    pub source: String,
}

impl TrainingRecord {
    fn byte_offset(&self) -> Option<usize> {
        if self.loss_start_offset == self.rendered_text.chars().count() {
            return Some(self.rendered_text.len());
        }
        self.rendered_text
            .char_indices()
            .nth(self.loss_start_offset)
            .map(|(b, _)| b)
    }

    /// The loss-bearing suffix: output followed by the terminator.
    pub fn target(&self) -> Option<&str> {
        self.byte_offset().map(|b| &self.rendered_text[b..])
    }

    /// The masked prefix.
    pub fn prompt(&self) -> Option<&str> {
        self.byte_offset().map(|b| &self.rendered_text[..b])
    }

    /// Recovers the instance output by removing `template`'s terminator.
    pub fn output<'a>(&'a self, template: &PromptTemplate) -> Option<&'a str> {
        self.target()?.strip_suffix(template.terminator)
    }

    pub fn offset_is_valid(&self) -> bool {
        let len = self.rendered_text.chars().count();
        self.loss_start_offset > 0 && self.loss_start_offset < len
    }
}

/// Renders every `(instruction, instance, task, source)` item with `template`.
pub fn render_records<'a, I>(template: &PromptTemplate, items: I) -> Vec<TrainingRecord>
where
    I: IntoIterator<Item = (&'a str, &'a Instance, &'a TaskId, &'a str)>,
{
    items
        .into_iter()
        .map(|(ins, inst, id, src)| template.render_record(ins, inst, id, src))
        .collect()
}
