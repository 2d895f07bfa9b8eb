//! Per-experiment persistence. Logs are the source of truth; everything
//! else is rebuilt from them on load.
//!
//! Layout under the data directory:
//!
//! ```text
//! experiments/<id>/plan.ilogcal
//!                 /participants.json
//!                 /settings.json
//!                 /audit.log        one AuditRecord per line
//!                 /events.log       header line, then one LogRecord per line
//!                 /batches.log      one BatchRecord per line, written after its events
//!                 /snapshots/
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ilog_core::context::ParticipantProfile;
use ilog_core::quality::{QualityParameters, SummaryOptions};
use ilog_core::schedule::{AuditRecord, RevisionPolicy};
use ilog_core::sim::LogRecord;
use serde::{Deserialize, Serialize};

use crate::format::{read_ndjson, write_json_line, FormatError, LogHeader};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{file}: {source}")]
    Corrupt { file: String, source: FormatError },
    #[error("invalid experiment id {0:?}")]
    InvalidId(String),
}

/// A committed ingest batch: events `[offset, offset + count)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: String,
    pub offset: u64,
    pub count: u64,
}

/// Researcher-editable settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Settings {
    /// Bumped whenever the plan or participant list is replaced; the audit
    /// log starts over with each generation.
    #[serde(default)]
    pub generation: u64,
    #[serde(default)]
    pub quality: QualityParameters,
    #[serde(default)]
    pub policy: RevisionPolicy,
    #[serde(default)]
    pub summary: SummaryOptions,
}

#[derive(Debug, Clone, Default)]
pub struct StoredExperiment {
    pub plan: Option<String>,
    pub participants: Vec<ParticipantProfile>,
    pub settings: Settings,
    pub audit: Vec<AuditRecord>,
    pub events: Vec<LogRecord>,
    pub batches: Vec<BatchRecord>,
}

pub trait Storage: Send + Sync {
    fn list(&self) -> Result<Vec<String>, StoreError>;
    /// `None` when the experiment was never created.
    fn load(&self, id: &str) -> Result<Option<StoredExperiment>, StoreError>;
    fn create(&self, id: &str) -> Result<(), StoreError>;
    fn write_plan(&self, id: &str, text: &str) -> Result<(), StoreError>;
    fn write_participants(&self, id: &str, participants: &[ParticipantProfile]) -> Result<(), StoreError>;
    fn write_settings(&self, id: &str, settings: &Settings) -> Result<(), StoreError>;
    /// Moves the current audit log aside; a new generation starts empty.
    fn archive_audit(&self, id: &str, generation: u64) -> Result<(), StoreError>;
    fn append_audit(&self, id: &str, record: &AuditRecord) -> Result<(), StoreError>;
    fn append_events(&self, id: &str, batch: &BatchRecord, records: &[LogRecord]) -> Result<(), StoreError>;
    fn write_snapshot(&self, id: &str, name: &str, body: &[u8]) -> Result<(), StoreError>;
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = data_dir.into();
        fs::create_dir_all(root.join("experiments"))?;
        Ok(Self { root })
    }

    fn dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.into()));
        }
        Ok(self.root.join("experiments").join(id))
    }

    fn file(&self, id: &str, name: &str) -> Result<PathBuf, StoreError> {
        Ok(self.dir(id)?.join(name))
    }
}

fn corrupt(path: &Path, source: FormatError) -> StoreError {
    StoreError::Corrupt { file: path.display().to_string(), source }
}

/// Replaces `path` atomically via a temporary sibling.
fn write_atomic(path: &Path, body: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(body)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

fn append(path: &Path, body: &[u8]) -> Result<(), StoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(body)?;
    f.sync_data()?;
    Ok(())
}

/// Complete lines of `path` with the byte offset just past each one. A
/// trailing line cut short by a crash is not returned.
fn complete_lines(path: &Path) -> Result<Vec<(String, u64)>, StoreError> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    let mut r = BufReader::new(f);
    let mut line = String::new();
    let mut end = 0u64;
    loop {
        line.clear();
        let n = r.read_line(&mut line)?;
        if n == 0 || !line.ends_with('\n') {
            return Ok(out);
        }
        end += n as u64;
        out.push((line.trim_end().to_string(), end));
    }
}

/// Cuts `path` back to `len` bytes when it is longer.
fn truncate(path: &Path, len: u64) -> Result<(), StoreError> {
    if fs::metadata(path).is_ok_and(|m| m.len() > len) {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(len)?;
        f.sync_all()?;
    }
    Ok(())
}

/// Parses the complete lines and drops any torn tail from the file.
fn load_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let lines = complete_lines(path)?;
    truncate(path, lines.last().map_or(0, |l| l.1))?;
    let text: Vec<&str> = lines.iter().map(|l| l.0.as_str()).collect();
    parse_lines(path, &text)
}

fn parse_lines<T: serde::de::DeserializeOwned>(path: &Path, lines: &[&str]) -> Result<Vec<T>, StoreError> {
    read_ndjson(lines.join("\n").as_bytes()).map_err(|e| corrupt(path, e))
}

impl Storage for FileStore {
    fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        for e in fs::read_dir(self.root.join("experiments"))? {
            let e = e?;
            if let Some(name) = e.file_name().to_str().filter(|n| valid_id(n) && e.path().is_dir()) {
                out.push(name.to_string());
            }
        }
        out.sort();
        Ok(out)
    }

    fn load(&self, id: &str) -> Result<Option<StoredExperiment>, StoreError> {
        let dir = self.dir(id)?;
        if !dir.is_dir() {
            return Ok(None);
        }
        let mut exp = StoredExperiment::default();
        let plan = dir.join("plan.ilogcal");
        if plan.exists() {
            exp.plan = Some(fs::read_to_string(plan)?);
        }
        let participants = dir.join("participants.json");
        if participants.exists() {
            exp.participants = crate::format::load_config(&participants).map_err(|e| corrupt(&participants, e))?;
        }
        let settings = dir.join("settings.json");
        if settings.exists() {
            exp.settings = crate::format::load_config(&settings).map_err(|e| corrupt(&settings, e))?;
        }
        exp.audit = load_lines(&dir.join("audit.log"))?;

        // batches.log is the commit record: events past the last committed
        // batch belong to a write that never finished and are cut off
        exp.batches = load_lines(&dir.join("batches.log"))?;
        let committed = exp.batches.last().map_or(0, |b| b.offset + b.count) as usize;
        let events = dir.join("events.log");
        let lines = complete_lines(&events)?;
        let Some((first, header_end)) = lines.first() else {
            return Err(corrupt(&events, FormatError::Schema("missing header".into())));
        };
        let header: LogHeader =
            serde_json::from_str(first).map_err(|source| corrupt(&events, FormatError::Json { line: 1, source }))?;
        header.check().map_err(|e| corrupt(&events, e))?;
        let body = &lines[1..];
        if body.len() < committed {
            return Err(corrupt(&events, FormatError::Schema(format!("{} events for {committed} committed", body.len()))));
        }
        let text: Vec<&str> = body[..committed].iter().map(|l| l.0.as_str()).collect();
        exp.events = parse_lines(&events, &text)?;
        truncate(&events, if committed == 0 { *header_end } else { body[committed - 1].1 })?;
        Ok(Some(exp))
    }

    fn create(&self, id: &str) -> Result<(), StoreError> {
        let dir = self.dir(id)?;
        fs::create_dir_all(dir.join("snapshots"))?;
        let events = dir.join("events.log");
        if !events.exists() {
            let mut head = Vec::new();
            write_json_line(&mut head, &LogHeader::new(vec![]))?;
            write_atomic(&events, &head)?;
        }
        Ok(())
    }

    fn write_plan(&self, id: &str, text: &str) -> Result<(), StoreError> {
        write_atomic(&self.file(id, "plan.ilogcal")?, text.as_bytes())
    }

    fn write_participants(&self, id: &str, participants: &[ParticipantProfile]) -> Result<(), StoreError> {
        let body = serde_json::to_vec_pretty(participants).map_err(io::Error::from)?;
        write_atomic(&self.file(id, "participants.json")?, &body)
    }

    fn write_settings(&self, id: &str, settings: &Settings) -> Result<(), StoreError> {
        let body = serde_json::to_vec_pretty(settings).map_err(io::Error::from)?;
        write_atomic(&self.file(id, "settings.json")?, &body)
    }

    fn archive_audit(&self, id: &str, generation: u64) -> Result<(), StoreError> {
        let audit = self.file(id, "audit.log")?;
        if audit.exists() {
            fs::rename(&audit, self.file(id, &format!("audit.{generation}.log"))?)?;
        }
        Ok(())
    }

    fn append_audit(&self, id: &str, record: &AuditRecord) -> Result<(), StoreError> {
        let mut line = Vec::new();
        write_json_line(&mut line, record)?;
        append(&self.file(id, "audit.log")?, &line)
    }

    fn append_events(&self, id: &str, batch: &BatchRecord, records: &[LogRecord]) -> Result<(), StoreError> {
        let mut body = Vec::new();
        for r in records {
            write_json_line(&mut body, r)?;
        }
        append(&self.file(id, "events.log")?, &body)?;
        let mut line = Vec::new();
        write_json_line(&mut line, batch)?;
        append(&self.file(id, "batches.log")?, &line)
    }

    fn write_snapshot(&self, id: &str, name: &str, body: &[u8]) -> Result<(), StoreError> {
        let dir = self.dir(id)?.join("snapshots");
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(name), body)
    }
}
