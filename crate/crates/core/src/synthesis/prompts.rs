//! Prompt rendering and completion parsing for each synthesis step.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::task::{Instance, TaskKind};

/// Header of the instruction-generation prompt.
pub const GENERATION_HEADER: &str = "Come up with a series of computational argumentation tasks:";

/// Question asked for every candidate by the relevance filter.
pub const RELEVANCE_QUESTION: &str =
    "Does the following task fall into the field of computational argumentation?";

pub const TYPE_HEADER: &str =
    "Decide whether each task is a classification, regression, or generation task.";

/// Instructions shorter than this many words are malformed.
pub const MIN_INSTRUCTION_WORDS: usize = 4;
/// Instructions longer than this many words are malformed.
pub const MAX_INSTRUCTION_WORDS: usize = 150;

/// Numbered few-shot list followed by an open line for item `l + 1`.
pub fn render_instruction_prompt<S: AsRef<str>>(fewshot: &[S]) -> String {
    let mut p = String::from(GENERATION_HEADER);
    p.push('\n');
    for (i, ins) in fewshot.iter().enumerate() {
        p.push_str(&format!("{}. {}\n", i + 1, one_line(ins.as_ref())));
    }
    p
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits `"12. text"` / `"12) text"` into `(12, "text")`.
fn numbered_item(line: &str) -> Option<(u32, &str)> {
    let line = line.trim_start();
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 || digits > 4 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !(rest.is_empty() || rest.starts_with(char::is_whitespace)) {
        return None;
    }
    Some((line[..digits].parse().ok()?, rest.trim()))
}

/// Items of a numbered-list completion, in order.
pub fn parse_numbered_list(completion: &str) -> Vec<String> {
    completion
        .lines()
        .filter_map(numbered_item)
        .map(|(_, text)| text.to_string())
        .collect()
}

/// Whether `text` contains another list marker (" 10. Next"), i.e. several
/// few-shot items run together on one line. A number ending a sentence
/// ("from 1 to 5.") is not a marker.
fn contains_list_marker(text: &str) -> bool {
    let words: Vec<&str> = text.split_whitespace().collect();
    words.windows(2).skip(1).any(|w| {
        let digits = w[0].chars().take_while(char::is_ascii_digit).count();
        digits > 0
            && digits < 4
            && (w[0][digits..] == *"." || w[0][digits..] == *")")
            && w[1].starts_with(char::is_uppercase)
    })
}

/// Reason a parsed instruction is unusable, if any.
pub fn malformed_reason(text: &str) -> Option<String> {
    let n = text.split_whitespace().count();
    if n < MIN_INSTRUCTION_WORDS {
        return Some(format!("too short ({n} words)"));
    }
    if n > MAX_INSTRUCTION_WORDS {
        return Some(format!("too long ({n} words)"));
    }
    if contains_list_marker(text) || text.contains(GENERATION_HEADER) {
        return Some("contains the few-shot list delimiter".into());
    }
    if !text.starts_with(|c: char| c.is_alphanumeric() || c == '"' || c == '\'') {
        return Some("does not start with a word".into());
    }
    None
}

/// Relevance prompt: the question, labelled exemplars, and the candidate.
/// `exemplars` pairs each instruction with whether it is relevant.
pub fn render_relevance_prompt(candidate: &str, exemplars: &[(&str, bool)]) -> String {
    let mut p = String::from(RELEVANCE_QUESTION);
    p.push_str(" Answer yes or no.\n\n");
    for (text, yes) in exemplars {
        p.push_str(&format!(
            "Task: {}\nAnswer: {}\n\n",
            one_line(text),
            if *yes { "Yes" } else { "No" }
        ));
    }
    p.push_str(&format!("Task: {}\nAnswer:", one_line(candidate)));
    p
}

/// True iff the completion's first token is "yes" (case-insensitive).
pub fn parse_relevance(completion: &str) -> bool {
    completion
        .split_whitespace()
        .next()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase() == "yes")
        .unwrap_or(false)
}

/// Type prompt listing exemplar instructions under each kind name.
pub fn render_type_prompt(candidate: &str, exemplars: &[(TaskKind, Vec<&str>)]) -> String {
    let mut p = String::from(TYPE_HEADER);
    p.push_str("\n\n");
    for (kind, texts) in exemplars {
        if texts.is_empty() {
            continue;
        }
        p.push_str(&format!("Examples of {} tasks:\n", kind.as_str()));
        for t in texts {
            p.push_str(&format!("- {}\n", one_line(t)));
        }
        p.push('\n');
    }
    p.push_str(&format!("Task: {}\nTask type:", one_line(candidate)));
    p
}

/// First kind keyword appearing in the completion; generation if none.
pub fn parse_task_kind(completion: &str) -> TaskKind {
    let lower = completion.to_lowercase();
    TaskKind::ALL
        .iter()
        .filter_map(|k| lower.find(k.as_str()).map(|pos| (pos, *k)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, k)| k)
        .unwrap_or(TaskKind::Generation)
}

const EXEMPLAR_INPUT_CHARS: usize = 1_000;

fn clip(s: &str, max_chars: usize) -> String {
    match s.char_indices().nth(max_chars) {
        Some((b, _)) => format!("{}...", &s[..b]),
        None => s.to_string(),
    }
}

/// Instance prompt. Classification and regression put the output first
/// (label or score, then a matching input); generation puts the input
/// first. `exemplars` are `(instruction, instance)` pairs of the same kind.
pub fn render_instance_prompt(
    instruction: &str,
    kind: TaskKind,
    exemplars: &[(&str, &Instance)],
) -> String {
    let output_first = kind != TaskKind::Generation;
    let mut p = String::from(match kind {
        TaskKind::Classification => "Given a classification task, first pick a class label, then write an input that belongs to that label. Produce examples for different labels. Leave the input empty if the task needs none.",
        TaskKind::Regression => "Given a regression task, first pick a numeric score, then write an input that deserves that score. Produce examples for different scores. Leave the input empty if the task needs none.",
        TaskKind::Generation => "Given a task, write an input for it and then the correct output. Leave the input empty if the task needs none.",
    });
    p.push_str("\n\n");
    let block = |input: &str, output: &str| {
        if output_first {
            format!("Output: {output}\nInput: {input}\n")
        } else {
            format!("Input: {input}\nOutput: {output}\n")
        }
    };
    for (ins, inst) in exemplars {
        p.push_str(&format!("Task: {}\n", one_line(ins)));
        p.push_str(&block(&clip(&inst.input, EXEMPLAR_INPUT_CHARS), &inst.output));
        p.push('\n');
    }
    p.push_str(&format!("Task: {}\n", one_line(instruction)));
    p
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Marker {
    Input,
    Output,
}

fn marker(line: &str) -> Option<(Marker, &str)> {
    let t = line.trim_start();
    for (name, m) in [("input:", Marker::Input), ("output:", Marker::Output)] {
        if t.len() >= name.len() && t.is_char_boundary(name.len()) && t[..name.len()].eq_ignore_ascii_case(name) {
            return Some((m, &t[name.len()..]));
        }
    }
    None
}

/// Pairs `Input:` / `Output:` blocks in either order. A block ends when a
/// marker it already holds reappears; a block without an output is
/// dropped, one without an input gets an empty input. Parsing stops at a
/// line starting a new `Task:`. Returns `None` if no output marker occurs.
pub fn parse_instance_blocks(completion: &str) -> Option<Vec<Instance>> {
    let mut segments: Vec<(Marker, String)> = Vec::new();
    let mut saw_output = false;
    for line in completion.lines() {
        if line.trim_start().to_lowercase().starts_with("task:") {
            break;
        }
        match marker(line) {
            Some((m, rest)) => {
                saw_output |= m == Marker::Output;
                segments.push((m, rest.trim().to_string()));
            }
            None => {
                if let Some((_, text)) = segments.last_mut() {
                    if !line.trim().is_empty() {
                        if !text.is_empty() {
                            text.push('\n');
                        }
                        text.push_str(line.trim());
                    }
                }
            }
        }
    }
    if !saw_output {
        return None;
    }
    let mut out = Vec::new();
    let mut input: Option<String> = None;
    let mut output: Option<String> = None;
    let mut flush = |input: &mut Option<String>, output: &mut Option<String>| {
        if let Some(o) = output.take() {
            out.push(Instance::new(input.take().unwrap_or_default(), o));
        }
        *input = None;
    };
    for (m, text) in segments {
        let slot_taken = match m {
            Marker::Input => input.is_some(),
            Marker::Output => output.is_some(),
        };
        if slot_taken {
            flush(&mut input, &mut output);
        }
        match m {
            Marker::Input => input = Some(text),
            Marker::Output => output = Some(text),
        }
    }
    flush(&mut input, &mut output);
    Some(out)
}
