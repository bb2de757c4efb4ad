//! Record/replay backends keyed by prompt hash and occurrence.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use argtune_core::backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResult, ReplayCursor,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{read_jsonl, write_jsonl, IoError};

/// Lowercase hex SHA-256 of the prompt text.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One scripted response: the `occurrence`-th time (from 0) a prompt with
/// this hash is sent, `response_text` is returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub prompt_hash: String,
    pub occurrence: u64,
    pub response_text: String,
}

impl FixtureRecord {
    pub fn for_prompt(prompt: &str, occurrence: u64, response_text: impl Into<String>) -> Self {
        FixtureRecord {
            prompt_hash: prompt_hash(prompt),
            occurrence,
            response_text: response_text.into(),
        }
    }
}

/// Serves responses from fixture records. A prompt seen more often than
/// it was recorded is a fixture miss.
pub struct ReplayBackend {
    responses: HashMap<(String, u64), String>,
    counters: Mutex<BTreeMap<String, u64>>,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        ReplayBackend {
            responses: records
                .into_iter()
                .map(|r| ((r.prompt_hash, r.occurrence), r.response_text))
                .collect(),
            counters: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Ok(Self::from_records(read_jsonl::<FixtureRecord>(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        let hash = prompt_hash(&request.prompt);
        let occurrence = {
            let mut counters = self.counters.lock().unwrap();
            let c = counters.entry(hash.clone()).or_insert(0);
            let n = *c;
            *c += 1;
            n
        };
        match self.responses.get(&(hash.clone(), occurrence)) {
            Some(text) => Ok(CompletionResult::stop(text.clone())),
            None => Err(BackendError::FixtureMiss {
                prompt_hash: hash,
                occurrence,
            }),
        }
    }

    fn replay_cursor(&self) -> Option<ReplayCursor> {
        Some(self.counters.lock().unwrap().clone())
    }

    fn restore_replay_cursor(&self, cursor: &ReplayCursor) {
        *self.counters.lock().unwrap() = cursor.clone();
    }
}

/// Passes requests to an inner backend and keeps every successful
/// exchange as a fixture record. Batches are recorded in request order, so
/// occurrences do not depend on the inner backend's scheduling.
pub struct RecordingBackend<B> {
    inner: B,
    state: Mutex<(BTreeMap<String, u64>, Vec<FixtureRecord>)>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            state: Mutex::new((BTreeMap::new(), Vec::new())),
        }
    }

    fn record(&self, request: &CompletionRequest, result: &Result<CompletionResult, BackendError>) {
        let hash = prompt_hash(&request.prompt);
        let mut state = self.state.lock().unwrap();
        let c = state.0.entry(hash.clone()).or_insert(0);
        let occurrence = *c;
        *c += 1;
        if let Ok(r) = result {
            state.1.push(FixtureRecord {
                prompt_hash: hash,
                occurrence,
                response_text: r.text.clone(),
            });
        }
    }

    pub fn records(&self) -> Vec<FixtureRecord> {
        self.state.lock().unwrap().1.clone()
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        write_jsonl(path, &self.records())
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        let r = self.inner.complete(request);
        self.record(request, &r);
        r
    }

    fn complete_batch(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<Result<CompletionResult, BackendError>> {
        let results = self.inner.complete_batch(requests);
        for (req, res) in requests.iter().zip(&results) {
            self.record(req, res);
        }
        results
    }

    fn replay_cursor(&self) -> Option<ReplayCursor> {
        Some(self.state.lock().unwrap().0.clone())
    }

    fn restore_replay_cursor(&self, cursor: &ReplayCursor) {
        self.state.lock().unwrap().0 = cursor.clone();
        self.inner.restore_replay_cursor(cursor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_responses_by_occurrence() {
        let b = ReplayBackend::from_records([
            FixtureRecord::for_prompt("q", 0, "pro"),
            FixtureRecord::for_prompt("q", 1, "con"),
        ]);
        let r = b.complete(&CompletionRequest::new("q")).unwrap();
        assert_eq!(r.text, "pro");
        assert_eq!(r.finish_reason, argtune_core::FinishReason::Stop);
        assert_eq!(b.complete(&CompletionRequest::new("q")).unwrap().text, "con");
        assert!(matches!(
            b.complete(&CompletionRequest::new("q")),
            Err(BackendError::FixtureMiss { occurrence: 2, .. })
        ));
        assert!(b.complete(&CompletionRequest::new("other")).is_err());
    }

    #[test]
    fn cursor_restores_position() {
        let b = ReplayBackend::from_records([
            FixtureRecord::for_prompt("q", 0, "a"),
            FixtureRecord::for_prompt("q", 1, "b"),
        ]);
        let start = b.replay_cursor().unwrap();
        b.complete(&CompletionRequest::new("q")).unwrap();
        let mid = b.replay_cursor().unwrap();
        b.restore_replay_cursor(&start);
        assert_eq!(b.complete(&CompletionRequest::new("q")).unwrap().text, "a");
        b.restore_replay_cursor(&mid);
        assert_eq!(b.complete(&CompletionRequest::new("q")).unwrap().text, "b");
    }

    #[test]
    fn recording_round_trips() {
        let source = ReplayBackend::from_records([
            FixtureRecord::for_prompt("x", 0, "1"),
            FixtureRecord::for_prompt("x", 1, "2"),
            FixtureRecord::for_prompt("y", 0, "3"),
        ]);
        let rec = RecordingBackend::new(source);
        let reqs = [CompletionRequest::new("x"), CompletionRequest::new("y"), CompletionRequest::new("x")];
        let first: Vec<String> = rec.complete_batch(&reqs).into_iter().map(|r| r.unwrap().text).collect();
        let replay = ReplayBackend::from_records(rec.records());
        let second: Vec<String> = replay.complete_batch(&reqs).into_iter().map(|r| r.unwrap().text).collect();
        assert_eq!(first, second);
        assert_eq!(first, ["1", "3", "2"]);
    }
}
