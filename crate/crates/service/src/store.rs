//! Append-only JSON-lines event logs, one file per session.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::ServiceError;
use crate::session::Event;

pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn create(dir: &Path, session_id: &str) -> Result<Self, ServiceError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{session_id}.jsonl"));
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn open(path: PathBuf) -> Result<Self, ServiceError> {
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the events in one call and syncs before returning, so a batch
    /// is either durable or ends in a torn last line.
    pub fn append(&mut self, events: &[Event]) -> Result<(), ServiceError> {
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e)?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    /// Reads a log. A final line without its newline is a write interrupted
    /// by a crash and is dropped and truncated away; any other bad line is
    /// corruption.
    pub fn read(path: &Path) -> Result<Vec<Event>, ServiceError> {
        let text = fs::read_to_string(path)?;
        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < text.len() {
            tracing::warn!(path = %path.display(), "dropping torn final event");
            OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
        }
        text[..complete]
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l).map_err(|e| ServiceError::CorruptLog {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", n + 1),
                })
            })
            .collect()
    }

    /// Every session log in `dir`, sorted by file name.
    pub fn list(dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        out.sort();
        Ok(out)
    }
}
