//! On-disk and on-wire formats: the event log, ndjson helpers, timeline and
//! heatmap tables, feature CSV and the model file.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ilog_core::context::{ParticipantId, ParticipantProfile};
use ilog_core::predictor::{ClassifierSpec, Encoder, FeatureVector, LabelKind, TrainedModel};
use ilog_core::quality::Heatmap;
use ilog_core::schedule::{Timeline, TimelineEntry};
use ilog_core::sim::{LogRecord, EVENT_LOG_SCHEMA};
use ilog_core::time::Timestamp;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const EVENT_LOG_KIND: &str = "ilog.events";
pub const MODEL_KIND: &str = "ilog.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

/// First line of an event log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub kind: String,
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub participants: Vec<ParticipantProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Timestamp>,
}

impl LogHeader {
    pub fn new(participants: Vec<ParticipantProfile>) -> Self {
        Self { kind: EVENT_LOG_KIND.into(), schema: EVENT_LOG_SCHEMA, participants, start: None, end: None }
    }

    pub fn check(&self) -> Result<(), FormatError> {
        if self.kind != EVENT_LOG_KIND {
            return Err(FormatError::Schema(format!("not an event log: kind {:?}", self.kind)));
        }
        if self.schema != EVENT_LOG_SCHEMA {
            return Err(FormatError::Schema(format!(
                "event log schema {} is not the supported {}",
                self.schema, EVENT_LOG_SCHEMA
            )));
        }
        Ok(())
    }

    pub fn profile(&self, id: &ParticipantId) -> Option<&ParticipantProfile> {
        self.participants.iter().find(|p| &p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLogFile {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

pub fn write_json_line<W: Write + ?Sized, T: Serialize + ?Sized>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn write_event_log<W: Write + ?Sized>(w: &mut W, header: &LogHeader, records: &[LogRecord]) -> io::Result<()> {
    write_json_line(w, header)?;
    for r in records {
        write_json_line(w, r)?;
    }
    Ok(())
}

/// Parses every non-blank line as `T`.
pub fn read_ndjson<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| FormatError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn read_event_log<R: BufRead>(r: R) -> Result<EventLogFile, FormatError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| FormatError::Schema("empty event log".into()))??;
    let header: LogHeader = serde_json::from_str(&first).map_err(|source| FormatError::Json { line: 1, source })?;
    header.check()?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|source| FormatError::Json { line: i + 2, source })?);
    }
    Ok(EventLogFile { header, records })
}

pub fn load_event_log(path: &Path) -> Result<EventLogFile, FormatError> {
    read_event_log(BufReader::new(File::open(path)?))
}

pub fn save_event_log(path: &Path, header: &LogHeader, records: &[LogRecord]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_event_log(&mut w, header, records)?;
    w.flush()
}

/// JSON array, or CSV with columns `id,gender,degree,department,timezone`
/// when the file name ends in `.csv`.
pub fn load_profiles(path: &Path) -> Result<Vec<ParticipantProfile>, FormatError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut r = csv::Reader::from_path(path)?;
        return r.deserialize().map(|p| p.map_err(FormatError::from)).collect();
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { line: source.line(), source })
}

/// JSON, or TOML when the file name ends in `.toml`.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
        return Ok(toml::from_str(&text)?);
    }
    serde_json::from_str(&text).map_err(|source| FormatError::Json { line: source.line(), source })
}

/// One scheduled occurrence of one participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineLine {
    pub participant: ParticipantId,
    #[serde(flatten)]
    pub entry: TimelineEntry,
}

pub fn timeline_lines(timeline: &Timeline, participants: &[ParticipantId]) -> Vec<TimelineLine> {
    let mut out = Vec::new();
    for p in participants {
        out.extend(timeline.entries(p).iter().map(|e| TimelineLine { participant: p.clone(), entry: *e }));
    }
    out
}

pub fn write_timeline_text<W: Write + ?Sized>(w: &mut W, lines: &[TimelineLine]) -> io::Result<()> {
    for l in lines {
        let o = &l.entry.occurrence;
        let mark = if l.entry.cancelled { "  cancelled" } else { "" };
        writeln!(w, "{}  {}  {}#{}{mark}", o.scheduled_at, l.participant, o.source, o.seq_no)?;
    }
    Ok(())
}

pub fn write_timeline_csv<W: Write>(w: W, lines: &[TimelineLine]) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["participant", "collection", "seq_no", "scheduled_at", "window_end", "cancelled"])?;
    for l in lines {
        let o = &l.entry.occurrence;
        csv.write_record([
            l.participant.as_str(),
            &o.source.to_string(),
            &o.seq_no.to_string(),
            &o.scheduled_at.to_string(),
            &o.window_end.to_string(),
            &l.entry.cancelled.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Participants as rows, days as columns, answer rates as cells; days
/// without deliveries are empty.
pub fn write_heatmap_csv<W: Write>(w: W, heatmap: &Heatmap) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(w);
    let mut head = vec![String::from("participant")];
    head.extend(heatmap.days.iter().map(|d| d.to_string()));
    csv.write_record(&head)?;
    for (p, row) in heatmap.participants.iter().zip(&heatmap.cells) {
        let mut rec = vec![p.to_string()];
        rec.extend(row.iter().map(|c| c.map_or_else(String::new, |c| format!("{:.4}", c.rate))));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_features_csv<W: Write>(w: W, rows: &[FeatureVector]) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "participant",
        "occurrence",
        "delivered_at",
        "weekday",
        "day_period",
        "we",
        "wa",
        "wo",
        "wi",
        "gender",
        "degree",
        "department",
        "label",
        "correct",
    ])?;
    for r in rows {
        csv.write_record([
            r.participant.as_str(),
            &r.occurrence.to_string(),
            &r.delivered_at.to_string(),
            &r.weekday.to_string(),
            r.day_period.as_str(),
            &r.we,
            &r.wa,
            &r.wo,
            &r.wi,
            &r.gender,
            &r.degree,
            &r.department,
            if r.label { "high" } else { "low" },
            r.correct.map_or("", |c| if c { "true" } else { "false" }),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// A trained classifier with everything needed to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: String,
    pub version: u32,
    pub spec: ClassifierSpec,
    pub label: LabelKind,
    pub encoder: Encoder,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(spec: ClassifierSpec, label: LabelKind, encoder: Encoder, model: TrainedModel) -> Self {
        Self { kind: MODEL_KIND.into(), version: MODEL_VERSION, spec, label, encoder, model }
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let m: ModelFile = load_config(path)?;
        if m.kind != MODEL_KIND || m.version != MODEL_VERSION {
            return Err(FormatError::Schema(format!("unsupported model file {} v{}", m.kind, m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_schema_is_checked() {
        let mut buf = Vec::new();
        write_event_log(&mut buf, &LogHeader::new(vec![]), &[]).unwrap();
        assert!(read_event_log(&buf[..]).unwrap().records.is_empty());
        let bad = br#"{"kind":"ilog.events","schema":99}"#;
        assert!(matches!(read_event_log(&bad[..]), Err(FormatError::Schema(_))));
        assert!(matches!(read_event_log(&b""[..]), Err(FormatError::Schema(_))));
    }

    #[test]
    fn bad_line_is_located() {
        let text = format!("{}\n\nnot json\n", serde_json::to_string(&LogHeader::new(vec![])).unwrap());
        match read_event_log(text.as_bytes()) {
            Err(FormatError::Json { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
