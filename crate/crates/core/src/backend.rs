//! Completion interface shared by the synthesis loop and the evaluation
//! harness. Transports (HTTP, replay fixtures) live in the std crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

/// Per-request sampling overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingOverrides {
    pub max_new_tokens: Option<u32>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub stop_sequences: Vec<String>,
    pub overrides: SamplingOverrides,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            stop_sequences: Vec::new(),
            overrides: SamplingOverrides::default(),
        }
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop_sequences.push(stop.into());
        self
    }

    pub fn with_max_new_tokens(mut self, n: u32) -> Self {
        self.overrides.max_new_tokens = Some(n);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency: Duration,
}

impl CompletionResult {
    pub fn stop(text: impl Into<String>) -> Self {
        CompletionResult {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            latency: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no recorded response for prompt {prompt_hash} (occurrence {occurrence})")]
    FixtureMiss { prompt_hash: String, occurrence: u64 },
    #[error("every request in the batch failed; first error: {0}")]
    AllFailed(String),
}

impl BackendError {
    /// Errors after which further requests are pointless. A fixture miss
    /// means a replay has diverged from its recording.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            BackendError::Auth(_) | BackendError::AllFailed(_) | BackendError::FixtureMiss { .. }
        )
    }
}

/// Occurrence counters of a replaying backend, keyed by prompt hash.
pub type ReplayCursor = alloc::collections::BTreeMap<String, u64>;

/// A text-completion backend.
///
/// Implementations must be deterministic for a fixed replay state when used
/// with the synthesis loop's resume support.
pub trait CompletionBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError>;

    /// Results positionally aligned with `requests`. Failures are per item.
    fn complete_batch(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<Result<CompletionResult, BackendError>> {
        requests.iter().map(|r| self.complete(r)).collect()
    }

    /// Replay position to store in checkpoints, for backends that have one.
    fn replay_cursor(&self) -> Option<ReplayCursor> {
        None
    }

    fn restore_replay_cursor(&self, _cursor: &ReplayCursor) {}
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(request)
    }

    fn complete_batch(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<Result<CompletionResult, BackendError>> {
        (**self).complete_batch(requests)
    }

    fn replay_cursor(&self) -> Option<ReplayCursor> {
        (**self).replay_cursor()
    }

    fn restore_replay_cursor(&self, cursor: &ReplayCursor) {
        (**self).restore_replay_cursor(cursor)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for alloc::boxed::Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(request)
    }

    fn complete_batch(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<Result<CompletionResult, BackendError>> {
        (**self).complete_batch(requests)
    }

    fn replay_cursor(&self) -> Option<ReplayCursor> {
        (**self).replay_cursor()
    }

    fn restore_replay_cursor(&self, cursor: &ReplayCursor) {
        (**self).restore_replay_cursor(cursor)
    }
}

/// Runs a batch and fails only when every request failed.
pub fn complete_all<B: CompletionBackend + ?Sized>(
    backend: &B,
    requests: &[CompletionRequest],
) -> Result<Vec<Result<CompletionResult, BackendError>>, BackendError> {
    let results = backend.complete_batch(requests);
    if !results.is_empty() && results.iter().all(Result::is_err) {
        let first = results
            .into_iter()
            .find_map(Result::err)
            .map(|e| alloc::format!("{e}"))
            .unwrap_or_default();
        return Err(BackendError::AllFailed(first));
    }
    Ok(results)
}
