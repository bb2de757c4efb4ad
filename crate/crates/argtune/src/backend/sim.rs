//! Offline stand-in for a generator model.
//!
//! Answers each synthesis prompt with plausible, deterministic text derived
//! from a hash of the prompt, so full pipeline runs (and fixture
//! recordings for replay) work without an endpoint.

use argtune_core::backend::{BackendError, CompletionBackend, CompletionRequest, CompletionResult};
use argtune_core::synthesis::{GENERATION_HEADER, RELEVANCE_QUESTION};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const CLASSIFY: &[&str] = &[
    "Classify", "Identify", "Decide whether", "Determine if", "Label", "Detect whether",
];
const RATE: &[&str] = &["Rate", "Score", "Estimate", "Assess on a scale", "Grade"];
const WRITE: &[&str] = &[
    "Write", "Generate", "Compose", "Rewrite", "Summarize", "Paraphrase", "Formulate",
];
const OBJECTS: &[&str] = &[
    "stance of the comment", "premise supporting the claim", "counterargument",
    "conclusion of the argument", "rhetorical strategy", "fallacy in the reasoning",
    "persuasiveness of the essay", "relation between two arguments", "key point",
    "frame of the debate", "major claim", "quality of the rebuttal", "evidence type",
    "clarity of the thesis", "attack on the opposing side", "implicit warrant",
    "emotional appeal", "audience of the speech", "reasoning in the review",
    "sufficiency of the support",
];
const CONTEXTS: &[&str] = &[
    "in a student essay", "in an online debate", "from a political speech",
    "in a product review", "on social media", "in a parliamentary debate",
    "in a news editorial", "for the given topic", "in a legal opinion",
    "in a discussion forum", "from a scientific abstract", "in a letter to the editor",
];
const OFF_TOPIC: &[&str] = &[
    "Translate the sentence into French", "Write a recipe for tomato soup",
    "Compute the sum of the listed numbers", "List three capital cities in Europe",
];
const LABEL_SETS: &[&[&str]] = &[
    &["pro", "con"],
    &["supported", "unsupported"],
    &["yes", "no"],
    &["claim", "premise", "none"],
    &["attack", "support"],
];

/// Deterministic fake completion model.
#[derive(Debug, Clone, Default)]
pub struct SimulatedBackend {
    pub seed: u64,
}

impl SimulatedBackend {
    pub fn new(seed: u64) -> Self {
        SimulatedBackend { seed }
    }

    fn rng_for(&self, prompt: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(prompt.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    fn respond(&self, prompt: &str) -> String {
        let mut rng = self.rng_for(prompt);
        if prompt.starts_with(GENERATION_HEADER) {
            let next = prompt.lines().filter(|l| l.contains(". ")).count() + 1;
            instructions(&mut rng, next)
        } else if prompt.starts_with(RELEVANCE_QUESTION) {
            let candidate = prompt.rsplit("Task: ").next().unwrap_or("");
            if OFF_TOPIC.iter().any(|o| candidate.starts_with(o)) {
                "No".into()
            } else if rng.gen_bool(0.05) {
                "No, it is too general.".into()
            } else {
                "Yes".into()
            }
        } else if prompt.trim_end().ends_with("Task type:") {
            let candidate = prompt.rsplit("Task: ").next().unwrap_or("");
            if CLASSIFY.iter().any(|v| candidate.starts_with(v)) {
                "classification".into()
            } else if RATE.iter().any(|v| candidate.starts_with(v)) {
                "regression".into()
            } else {
                "generation".into()
            }
        } else if prompt.starts_with("Given a classification") {
            let labels = LABEL_SETS.choose(&mut rng).unwrap();
            let mut s = String::new();
            for (k, l) in labels.iter().enumerate() {
                s.push_str(&format!("Output: {l}\nInput: {}\n\n", sentence(&mut rng, k)));
            }
            s
        } else if prompt.starts_with("Given a regression") {
            let a = rng.gen_range(1..=2);
            let b = rng.gen_range(4..=5);
            format!(
                "Output: {a}\nInput: {}\n\nOutput: {b}\nInput: {}\n",
                sentence(&mut rng, 0),
                sentence(&mut rng, 1)
            )
        } else if prompt.starts_with("Given a task") {
            if rng.gen_bool(0.03) {
                return "I cannot produce an example for this task.".into();
            }
            format!(
                "Input: {}\nOutput: {}\n",
                sentence(&mut rng, 0),
                sentence(&mut rng, 1)
            )
        } else {
            sentence(&mut rng, 0)
        }
    }
}

fn instructions<R: Rng>(rng: &mut R, first: usize) -> String {
    let n = rng.gen_range(3..=6);
    let mut s = String::new();
    for k in 0..n {
        let text = match rng.gen_range(0..20) {
            0 => format!("{}.", OFF_TOPIC.choose(rng).unwrap()),
            1 => "Do it.".to_string(),
            2..=7 => format!(
                "{} the {} {}.",
                CLASSIFY.choose(rng).unwrap(),
                OBJECTS.choose(rng).unwrap(),
                CONTEXTS.choose(rng).unwrap()
            ),
            8..=11 => format!(
                "{} the {} {} from 1 to 5.",
                RATE.choose(rng).unwrap(),
                OBJECTS.choose(rng).unwrap(),
                CONTEXTS.choose(rng).unwrap()
            ),
            _ => format!(
                "{} a {} {} that addresses the {}.",
                WRITE.choose(rng).unwrap(),
                OBJECTS.choose(rng).unwrap(),
                CONTEXTS.choose(rng).unwrap(),
                OBJECTS.choose(rng).unwrap()
            ),
        };
        s.push_str(&format!("{}. {}\n", first + k, text));
    }
    s
}

fn sentence<R: Rng>(rng: &mut R, k: usize) -> String {
    const SUBJECTS: &[&str] = &[
        "School uniforms", "Nuclear power", "A four-day week", "Online voting",
        "Rent control", "Space exploration", "Homework", "Public transport",
    ];
    const VERDICTS: &[&str] = &[
        "should be adopted because it saves money",
        "does more harm than good for most people",
        "is supported by recent evidence",
        "ignores the cost to local communities",
        "would reduce inequality over time",
    ];
    format!(
        "{} {}{}.",
        SUBJECTS.choose(rng).unwrap(),
        VERDICTS.choose(rng).unwrap(),
        if k % 2 == 1 { ", as critics note" } else { "" }
    )
}

impl CompletionBackend for SimulatedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        Ok(CompletionResult::stop(self.respond(&request.prompt)))
    }
}
