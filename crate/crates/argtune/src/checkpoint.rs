//! On-disk checkpoints of a synthesis run.
//!
//! A checkpoint directory holds `pool.jsonl` (task file format),
//! `run_log.jsonl` and `cursor.json`. The two JSONL files only grow; the
//! cursor, replaced atomically, records how many of their lines belong to
//! the checkpoint, so lines appended by an interrupted write are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use argtune_core::synthesis::{CheckpointSink, Cursor, RunLogEntry, SynthesisState};
use argtune_core::task::{Task, TaskPool};
use serde::{Deserialize, Serialize};

use crate::io::{append_jsonl, read_json, read_jsonl, write_json_pretty, write_jsonl, IoError};

pub const POOL_FILE: &str = "pool.jsonl";
pub const LOG_FILE: &str = "run_log.jsonl";
pub const CURSOR_FILE: &str = "cursor.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CursorRecord {
    pub pool_len: usize,
    pub log_len: usize,
    #[serde(flatten)]
    pub cursor: Cursor,
}

pub struct DirCheckpoint {
    dir: PathBuf,
    pool_len: usize,
    log_len: usize,
}

impl DirCheckpoint {
    /// Starts a fresh checkpoint directory holding `state`.
    pub fn create(dir: &Path, state: &SynthesisState) -> Result<Self, IoError> {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        write_jsonl(&dir.join(POOL_FILE), state.pool.tasks())?;
        write_jsonl(&dir.join(LOG_FILE), &state.log)?;
        let mut sink = DirCheckpoint {
            dir: dir.to_path_buf(),
            pool_len: state.pool.len(),
            log_len: state.log.len(),
        };
        sink.write_cursor(state)?;
        Ok(sink)
    }

    /// Reopens a checkpoint directory and loads its state.
    pub fn open(dir: &Path) -> Result<(Self, SynthesisState), IoError> {
        let record: CursorRecord = read_json(&dir.join(CURSOR_FILE))?;
        let pool_path = dir.join(POOL_FILE);
        let mut tasks: Vec<Task> = read_jsonl(&pool_path)?;
        let mut log: Vec<RunLogEntry> = read_jsonl(&dir.join(LOG_FILE))?;
        if tasks.len() < record.pool_len || log.len() < record.log_len {
            return Err(IoError::Parse {
                path: dir.join(CURSOR_FILE),
                line: 1,
                message: "checkpoint files are shorter than the cursor records".into(),
            });
        }
        tasks.truncate(record.pool_len);
        log.truncate(record.log_len);
        let pool = TaskPool::from_tasks(tasks).map_err(|e| IoError::Parse {
            path: pool_path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        let state = SynthesisState {
            pool,
            log,
            cursor: record.cursor,
        };
        // Rewrite so that any torn tail is dropped before appending again.
        let sink = DirCheckpoint::create(dir, &state)?;
        Ok((sink, state))
    }

    fn write_cursor(&mut self, state: &SynthesisState) -> Result<(), IoError> {
        write_json_pretty(
            &self.dir.join(CURSOR_FILE),
            &CursorRecord {
                pool_len: self.pool_len,
                log_len: self.log_len,
                cursor: state.cursor.clone(),
            },
        )
    }

    fn save(&mut self, state: &SynthesisState) -> Result<(), IoError> {
        let tasks = state.pool.tasks();
        if tasks.len() > self.pool_len {
            append_jsonl(&self.dir.join(POOL_FILE), &tasks[self.pool_len..])?;
            self.pool_len = tasks.len();
        }
        if state.log.len() > self.log_len {
            append_jsonl(&self.dir.join(LOG_FILE), &state.log[self.log_len..])?;
            self.log_len = state.log.len();
        }
        self.write_cursor(state)
    }
}

impl CheckpointSink for DirCheckpoint {
    fn checkpoint(&mut self, state: &SynthesisState) -> Result<(), String> {
        self.save(state).map_err(|e| e.to_string())
    }
}
