//! Append-only JSON Lines log of interaction events.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::StoreError;
use crate::analytics::InteractionEvent;

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses log text. An unterminated final line that fails to parse is the
/// residue of an interrupted write and is dropped; the returned flag says
/// whether that happened.
fn parse_log(text: &str, path: &Path) -> Result<(Vec<InteractionEvent>, bool), StoreError> {
    let mut events = Vec::new();
    let terminated = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<InteractionEvent>(line) {
            Ok(e) => events.push(e),
            Err(_) if i + 1 == lines.len() && !terminated => {
                log::warn!("{}: dropping truncated trailing line {}", path.display(), i + 1);
                return Ok((events, true));
            }
            Err(e) => {
                return Err(StoreError::Event {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok((events, false))
}

/// Reads every event in file order.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<InteractionEvent>, StoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_log(&text, path)?.0)
}

/// Single writer over one log file, enforcing per-session clock order.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    last: HashMap<String, u64>,
    len: usize,
}

impl EventLog {
    /// Opens or creates the log. A truncated trailing line left by a crash
    /// is cut off, and a complete but unterminated one gets its newline.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let existing = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path, e)),
        };
        let (events, dropped) = parse_log(&existing, &path)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        if dropped {
            let keep = existing.rfind('\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(|e| io_err(&path, e))?;
        } else if !existing.is_empty() && !existing.ends_with('\n') {
            file.write_all(b"\n").map_err(|e| io_err(&path, e))?;
        }
        let mut last = HashMap::new();
        for e in &events {
            let t = last.entry(e.session.clone()).or_insert(e.t_ms);
            *t = (*t).max(e.t_ms);
        }
        Ok(EventLog {
            path,
            file,
            last,
            len: events.len(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of events in the log.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn last_t_ms(&self, session: &str) -> Option<u64> {
        self.last.get(session).copied()
    }

    /// Appends one line and syncs it to disk before returning.
    pub fn append(&mut self, event: &InteractionEvent) -> Result<(), StoreError> {
        if let Err(e) = event.validate() {
            return Err(StoreError::Event {
                path: self.path.clone(),
                line: self.len + 1,
                reason: e.to_string(),
            });
        }
        if let Some(last) = self.last_t_ms(&event.session) {
            if event.t_ms < last {
                return Err(StoreError::OutOfOrder {
                    session: event.session.clone(),
                    last,
                    got: event.t_ms,
                });
            }
        }
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .map_err(|e| io_err(&self.path, e))?;
        self.file.sync_data().map_err(|e| io_err(&self.path, e))?;
        self.last.insert(event.session.clone(), event.t_ms);
        self.len += 1;
        Ok(())
    }
}

/// Opens the log, appends one event and closes it again.
pub fn append_event(path: impl AsRef<Path>, event: &InteractionEvent) -> Result<(), StoreError> {
    EventLog::open(path)?.append(event)
}
