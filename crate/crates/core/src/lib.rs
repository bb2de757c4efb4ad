//! Task model, similarity scoring, synthesis loop, curation and evaluation
//! for instruction-tuning on argumentation tasks.
//!
//! Everything here is allocation-only and performs no IO; file formats,
//! HTTP backends and the command line live in the `argtune` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod backend;
pub mod curation;
pub mod eval;
pub mod rng;
pub mod rouge;
pub mod synthesis;
pub mod task;

pub use backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResult, FinishReason,
    ReplayCursor,
};
pub use rouge::{max_similarity, rouge_l_f1, SimilarityIndex, SimilarityScore};
pub use task::{
    Area, Instance, Instruction, PoolError, Provenance, Task, TaskId, TaskKind, TaskPool,
    TaskType, Violation,
};
