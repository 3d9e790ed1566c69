//! Append-only event log.
//!
//! Every state change is one JSON line. Replaying the log rebuilds the
//! in-memory index; compaction rewrites it with only the live records
//! (through a temporary file and an atomic rename). A torn final line left by
//! a crash is dropped on open.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::service::{SessionRecord, StoredTrace};

pub const LOG_FILE: &str = "events.log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated { session: SessionRecord },
    TraceStored { session_id: String, video_id: String, trace: StoredTrace },
    SessionCompleted { session_id: String, completion_code: String },
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    fsync: bool,
    appended: usize,
}

impl EventLog {
    /// Opens (or creates) the log in `dir` and returns the events it holds.
    pub fn open(dir: &Path, fsync: bool) -> Result<(EventLog, Vec<Event>), ServiceError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut events = Vec::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut lines = reader.split(b'\n').enumerate().peekable();
            while let Some((idx, line)) = lines.next() {
                let line = line?;
                let is_last = lines.peek().is_none();
                match serde_json::from_slice::<Event>(&line) {
                    Ok(ev) => {
                        events.push(ev);
                        valid_len += line.len() as u64 + 1;
                    }
                    Err(_) if line.is_empty() => valid_len += 1,
                    Err(e) if is_last => {
                        tracing::warn!("dropping torn record at line {}: {e}", idx + 1);
                    }
                    Err(e) => return Err(ServiceError::CorruptLog { line: idx + 1, message: e.to_string() }),
                }
            }
            let on_disk = fs::metadata(&path)?.len();
            if valid_len < on_disk {
                OpenOptions::new().write(true).open(&path)?.set_len(valid_len)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let appended = events.len();
        Ok((EventLog { path, file, fsync, appended }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Records held in the file, live or superseded.
    pub fn len(&self) -> usize {
        self.appended
    }

    pub fn is_empty(&self) -> bool {
        self.appended == 0
    }

    pub fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        if self.fsync {
            self.file.sync_data()?;
        }
        self.appended += 1;
        Ok(())
    }

    /// Replaces the log with `events`.
    pub fn rewrite(&mut self, events: &[Event]) -> Result<(), ServiceError> {
        let tmp = self.path.with_extension("log.tmp");
        {
            let mut out = File::create(&tmp)?;
            for ev in events {
                let mut line = serde_json::to_vec(ev).map_err(std::io::Error::other)?;
                line.push(b'\n');
                out.write_all(&line)?;
            }
            out.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        self.file = OpenOptions::new().append(true).open(&self.path)?;
        self.appended = events.len();
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), ServiceError> {
        self.file.flush()?;
        self.file.sync_all()?;
        Ok(())
    }
}
