//! Deterministic automata over characters describing a task's valid output
//! language, and first-match decoding of free-form model output against them.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::task::{canonical_label, TaskType};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutomatonError {
    #[error("generation tasks are decoded openly and have no automaton")]
    OpenGeneration,
    #[error("classification task has no labels")]
    NoLabels,
    #[error("a label is empty after canonicalization")]
    EmptyLabel,
    #[error("invalid regression range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct State {
    accepting: bool,
    edges: BTreeMap<char, usize>,
}

/// A DFA over lowercase characters; state 0 is the start state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    states: Vec<State>,
}

impl Dfa {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    fn step(&self, state: usize, c: char) -> Option<usize> {
        self.states[state].edges.get(&c).copied()
    }

    /// Feeds one input character case-insensitively.
    fn step_folded(&self, mut state: usize, c: char) -> Option<usize> {
        for lc in c.to_lowercase() {
            state = self.step(state, lc)?;
        }
        Some(state)
    }

    fn is_accepting(&self, state: usize) -> bool {
        self.states[state].accepting
    }

    /// Minimal acyclic DFA for a finite set of words: a trie whose
    /// equivalent suffix states are merged.
    fn from_words(words: &[String]) -> Dfa {
        let mut trie = vec![State {
            accepting: false,
            edges: BTreeMap::new(),
        }];
        for w in words {
            let mut s = 0;
            for c in w.chars() {
                s = match trie[s].edges.get(&c) {
                    Some(&n) => n,
                    None => {
                        trie.push(State {
                            accepting: false,
                            edges: BTreeMap::new(),
                        });
                        let n = trie.len() - 1;
                        trie[s].edges.insert(c, n);
                        n
                    }
                };
            }
            trie[s].accepting = true;
        }

        // Children always have larger indices than parents in the trie, so a
        // reverse sweep sees every child before its parent.
        let mut canon: Vec<usize> = vec![0; trie.len()];
        let mut registry: BTreeMap<(bool, Vec<(char, usize)>), usize> = BTreeMap::new();
        let mut minimized: Vec<State> = Vec::new();
        for s in (0..trie.len()).rev() {
            let sig_edges: Vec<(char, usize)> =
                trie[s].edges.iter().map(|(&c, &n)| (c, canon[n])).collect();
            let key = (trie[s].accepting, sig_edges);
            let id = match registry.get(&key) {
                Some(&id) => id,
                None => {
                    minimized.push(State {
                        accepting: key.0,
                        edges: key.1.iter().copied().collect(),
                    });
                    let id = minimized.len() - 1;
                    registry.insert(key, id);
                    id
                }
            };
            canon[s] = id;
        }
        // Renumber so the start state is 0.
        let start = canon[0];
        let n = minimized.len();
        let remap = |i: usize| n - 1 - i;
        debug_assert_eq!(remap(start), 0);
        let mut states = vec![
            State {
                accepting: false,
                edges: BTreeMap::new()
            };
            n
        ];
        for (i, st) in minimized.into_iter().enumerate() {
            states[remap(i)] = State {
                accepting: st.accepting,
                edges: st.edges.into_iter().map(|(c, t)| (c, remap(t))).collect(),
            };
        }
        Dfa { states }
    }

    /// Optional sign, digits, optional `.` followed by digits.
    fn numeral() -> Dfa {
        const START: usize = 0;
        const SIGN: usize = 1;
        const INT: usize = 2;
        const DOT: usize = 3;
        const FRAC: usize = 4;
        let mut states = vec![
            State {
                accepting: false,
                edges: BTreeMap::new()
            };
            5
        ];
        states[INT].accepting = true;
        states[FRAC].accepting = true;
        for d in '0'..='9' {
            states[START].edges.insert(d, INT);
            states[SIGN].edges.insert(d, INT);
            states[INT].edges.insert(d, INT);
            states[DOT].edges.insert(d, FRAC);
            states[FRAC].edges.insert(d, FRAC);
        }
        states[START].edges.insert('+', SIGN);
        states[START].edges.insert('-', SIGN);
        states[INT].edges.insert('.', DOT);
        Dfa { states }
    }
}

/// Output language of a constrained task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Language {
    Labels(Vec<String>),
    Numeric { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelAutomaton {
    dfa: Dfa,
    language: Language,
}

/// A value decoded from model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Decoded {
    Label(String),
    Number(f64),
    Text(String),
}

impl Decoded {
    pub fn as_label(&self) -> Option<&str> {
        match self {
            Decoded::Label(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Decoded::Number(v) => Some(*v),
            _ => None,
        }
    }
}

/// A decoded value with the byte span of `raw_output` it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeMatch {
    pub value: Decoded,
    pub span: Range<usize>,
}

pub fn compile_automaton(task_type: &TaskType) -> Result<LabelAutomaton, AutomatonError> {
    match task_type {
        TaskType::Generation => Err(AutomatonError::OpenGeneration),
        TaskType::Classification { labels } => {
            if labels.is_empty() {
                return Err(AutomatonError::NoLabels);
            }
            let canon: Vec<String> = labels.iter().map(|l| canonical_label(l)).collect();
            if canon.iter().any(String::is_empty) {
                return Err(AutomatonError::EmptyLabel);
            }
            let mut ordered: Vec<String> = Vec::new();
            for l in canon {
                if !ordered.contains(&l) {
                    ordered.push(l);
                }
            }
            Ok(LabelAutomaton {
                dfa: Dfa::from_words(&ordered),
                language: Language::Labels(ordered),
            })
        }
        TaskType::Regression { min, max } => {
            if !(min.is_finite() && max.is_finite() && min < max) {
                return Err(AutomatonError::InvalidRange {
                    min: *min,
                    max: *max,
                });
            }
            Ok(LabelAutomaton {
                dfa: Dfa::numeral(),
                language: Language::Numeric {
                    min: *min,
                    max: *max,
                },
            })
        }
    }
}

impl LabelAutomaton {
    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    fn is_numeric(&self) -> bool {
        matches!(self.language, Language::Numeric { .. })
    }

    /// Whole-string membership, including the range check for numerals.
    pub fn accepts(&self, text: &str) -> bool {
        let mut s = 0;
        for c in text.chars() {
            match self.dfa.step_folded(s, c) {
                Some(n) => s = n,
                None => return false,
            }
        }
        self.dfa.is_accepting(s) && self.interpret(text).is_some()
    }

    /// Maps an accepted string to its value; `None` if out of range.
    fn interpret(&self, text: &str) -> Option<Decoded> {
        match &self.language {
            Language::Labels(_) => Some(Decoded::Label(canonical_label(text))),
            Language::Numeric { min, max } => {
                let v: f64 = text.parse().ok()?;
                (v.is_finite() && v >= *min && v <= *max).then_some(Decoded::Number(v))
            }
        }
    }

    fn may_start_after(&self, prev: char) -> bool {
        if prev.is_alphanumeric() {
            return false;
        }
        !(self.is_numeric() && matches!(prev, '.' | '+' | '-'))
    }

    /// First maximal match of the language in `raw_output`.
    ///
    /// Candidate matches must start and end on word boundaries. At each
    /// start position the longest accepted string wins; if that string fails
    /// the range check the position yields nothing, so "45" never decodes
    /// as "4".
    pub fn decode(&self, raw_output: &str) -> Option<DecodeMatch> {
        let chars: Vec<(usize, char)> = raw_output.char_indices().collect();
        let byte_end = |k: usize| chars.get(k).map_or(raw_output.len(), |&(b, _)| b);
        for start in 0..chars.len() {
            if start > 0 && !self.may_start_after(chars[start - 1].1) {
                continue;
            }
            let mut state = 0;
            let mut best: Option<usize> = None;
            for k in start..chars.len() {
                match self.dfa.step_folded(state, chars[k].1) {
                    Some(n) => state = n,
                    None => break,
                }
                let at_boundary = chars.get(k + 1).is_none_or(|&(_, c)| !c.is_alphanumeric());
                if self.dfa.is_accepting(state) && at_boundary {
                    best = Some(k + 1);
                }
            }
            if let Some(end) = best {
                let span = chars[start].0..byte_end(end);
                if let Some(value) = self.interpret(&raw_output[span.clone()]) {
                    return Some(DecodeMatch { value, span });
                }
            }
        }
        None
    }
}

/// Decodes `raw_output`, returning only the value.
pub fn decode(raw_output: &str, automaton: &LabelAutomaton) -> Option<Decoded> {
    automaton.decode(raw_output).map(|m| m.value)
}

impl core::fmt::Display for Language {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Language::Labels(l) => write!(f, "{{{}}}", l.join(", ")),
            Language::Numeric { min, max } => write!(f, "[{min}, {max}]"),
        }
    }
}

impl LabelAutomaton {
    /// Canonical label list, empty for numeric languages.
    pub fn labels(&self) -> Vec<String> {
        match &self.language {
            Language::Labels(l) => l.clone(),
            Language::Numeric { .. } => Vec::new(),
        }
    }

    pub fn describe(&self) -> String {
        self.language.to_string()
    }
}
