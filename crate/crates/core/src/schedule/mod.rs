//! Compiled per-participant timelines and their runtime revision.

pub mod expand;
pub mod revision;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::context::{ParticipantId, ParticipantProfile};
use crate::plan::{validate_plan, DiaryOrTask, ExperimentPlan, QCategory, RecurrenceRule, SensorType};
use crate::time::{Date, Timestamp};

pub use expand::{expand, expand_capped, occurrence_count, ExpandError, DEFAULT_OCCURRENCE_CAP};
pub use revision::{
    apply_revision, Actor, AuditNote, AuditRecord, Change, Limit, Revision, RevisionError, RevisionPolicy,
    RevisionTarget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollectionKind {
    Question,
    Sensor,
}

/// Identifies one question or sensor collection inside a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CollectionRef {
    pub calendar_id: u64,
    pub context_id: u64,
    pub kind: CollectionKind,
    pub collection_id: u64,
}

impl CollectionRef {
    pub fn question(calendar_id: u64, context_id: u64, cid: u64) -> Self {
        Self { calendar_id, context_id, kind: CollectionKind::Question, collection_id: cid }
    }

    pub fn sensor(calendar_id: u64, context_id: u64, sid: u64) -> Self {
        Self { calendar_id, context_id, kind: CollectionKind::Sensor, collection_id: sid }
    }
}

impl fmt::Display for CollectionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            CollectionKind::Question => "question",
            CollectionKind::Sensor => "sensor",
        };
        write!(f, "calendar[{}]/context[{}]/{kind}[{}]", self.calendar_id, self.context_id, self.collection_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OccurrenceRef {
    pub collection: CollectionRef,
    pub seq_no: u64,
}

impl fmt::Display for OccurrenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.collection, self.seq_no)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub source: CollectionRef,
    pub seq_no: u64,
    pub scheduled_at: Timestamp,
    /// Valid until the next occurrence of the same collection, capped at its DTEND.
    pub window_end: Timestamp,
}

impl Occurrence {
    pub fn reference(&self) -> OccurrenceRef {
        OccurrenceRef { collection: self.source, seq_no: self.seq_no }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub occurrence: Occurrence,
    pub cancelled: bool,
}

/// What the timeline needs to remember about each collection of the plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionSpec {
    pub dtstart: Timestamp,
    pub dtend: Timestamp,
    pub rrule: RecurrenceRule,
    pub accepted: bool,
    /// Set for question collections.
    pub category: Option<QCategory>,
    /// Sensor name for sensor collections, question text for questions.
    pub label: String,
    #[serde(default)]
    pub options: Vec<String>,
    pub protocol: Option<DiaryOrTask>,
    pub sensor_type: Option<SensorType>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("plan has validation errors: {0}")]
    InvalidPlan(String),
    #[error("{path}: {source}")]
    Expand { path: String, source: ExpandError },
}

/// Per-participant schedules compiled from a plan, plus the audit log of every
/// applied revision. The current state is always the fold of the audit log
/// over the compiled plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    pub(crate) collections: BTreeMap<CollectionRef, CollectionSpec>,
    pub(crate) schedules: BTreeMap<ParticipantId, Arc<Vec<TimelineEntry>>>,
    pub(crate) audit: Vec<AuditRecord>,
    pub(crate) cancel_tally: BTreeMap<(ParticipantId, Date), u32>,
    pub(crate) version: u64,
}

pub(crate) fn entry_order(a: &TimelineEntry, b: &TimelineEntry) -> core::cmp::Ordering {
    let (a, b) = (&a.occurrence, &b.occurrence);
    a.scheduled_at.cmp(&b.scheduled_at).then(a.source.cmp(&b.source)).then(a.seq_no.cmp(&b.seq_no))
}

/// Entries for one collection, `window_end` filled in.
pub(crate) fn collection_entries(
    source: CollectionRef,
    instants: &[Timestamp],
    first_seq: u64,
    dtend: Timestamp,
) -> impl Iterator<Item = TimelineEntry> + '_ {
    instants.iter().enumerate().map(move |(i, &at)| TimelineEntry {
        occurrence: Occurrence {
            source,
            seq_no: first_seq + i as u64,
            scheduled_at: at,
            window_end: instants.get(i + 1).copied().unwrap_or(dtend).min(dtend),
        },
        cancelled: false,
    })
}

/// Expands every accepted question collection and every sensor collection and
/// merges them into one time-sorted schedule per participant. Rejected
/// (status 0) collections contribute nothing but are remembered for
/// reinstatement.
pub fn compile(plan: &ExperimentPlan, participants: &[ParticipantProfile]) -> Result<Timeline, CompileError> {
    if let Some(err) = validate_plan(plan).into_iter().find(|d| d.is_error()) {
        return Err(CompileError::InvalidPlan(alloc::format!("{err}")));
    }
    let mut collections = BTreeMap::new();
    let mut entries = Vec::new();
    for (cal, ctx, q) in plan.questions() {
        let source = CollectionRef::question(cal, ctx, q.cid);
        collections.insert(
            source,
            CollectionSpec {
                dtstart: q.dtstart,
                dtend: q.dtend,
                rrule: q.rrule,
                accepted: q.status,
                category: Some(q.question.qcategory),
                label: q.question.question_content.clone(),
                options: q.question.answer_options.clone(),
                protocol: Some(q.protocol()),
                sensor_type: None,
            },
        );
        if q.status {
            let instants = expand::expand(&q.rrule, q.dtstart, q.dtend)
                .map_err(|source_err| CompileError::Expand { path: alloc::format!("{source}"), source: source_err })?;
            entries.extend(collection_entries(source, &instants, 0, q.dtend));
        }
    }
    for (cal, ctx, s) in plan.sensors() {
        let source = CollectionRef::sensor(cal, ctx, s.sid);
        collections.insert(
            source,
            CollectionSpec {
                dtstart: s.dtstart,
                dtend: s.dtend,
                rrule: s.rrule,
                accepted: true,
                category: None,
                label: s.sensor.name.clone(),
                options: Vec::new(),
                protocol: None,
                sensor_type: Some(s.sensor.sensor_type),
            },
        );
        let instants = expand::expand(&s.rrule, s.dtstart, s.dtend)
            .map_err(|source_err| CompileError::Expand { path: alloc::format!("{source}"), source: source_err })?;
        entries.extend(collection_entries(source, &instants, 0, s.dtend));
    }
    entries.sort_by(entry_order);
    let shared = Arc::new(entries);
    let schedules = participants.iter().map(|p| (p.id.clone(), Arc::clone(&shared))).collect();
    Ok(Timeline { collections, schedules, audit: Vec::new(), cancel_tally: BTreeMap::new(), version: 0 })
}

impl Timeline {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn participants(&self) -> impl Iterator<Item = &ParticipantId> {
        self.schedules.keys()
    }

    pub fn collections(&self) -> &BTreeMap<CollectionRef, CollectionSpec> {
        &self.collections
    }

    pub fn collection(&self, r: &CollectionRef) -> Option<&CollectionSpec> {
        self.collections.get(r)
    }

    /// All entries for a participant, cancelled ones included, sorted by time.
    pub fn entries(&self, participant: &ParticipantId) -> &[TimelineEntry] {
        self.schedules.get(participant).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Non-cancelled occurrences for a participant.
    pub fn occurrences<'a>(&'a self, participant: &ParticipantId) -> impl Iterator<Item = &'a Occurrence> + 'a {
        self.entries(participant).iter().filter(|e| !e.cancelled).map(|e| &e.occurrence)
    }

    /// Earliest non-cancelled occurrence at or after `now`.
    pub fn next_due(&self, participant: &ParticipantId, now: Timestamp) -> Option<&Occurrence> {
        let entries = self.entries(participant);
        let from = entries.partition_point(|e| e.occurrence.scheduled_at < now);
        entries[from..].iter().find(|e| !e.cancelled).map(|e| &e.occurrence)
    }

    /// Rebuilds state by applying `audit` to a freshly compiled timeline.
    pub fn replay(compiled: &Timeline, audit: &[AuditRecord]) -> Result<Timeline, RevisionError> {
        let mut t = compiled.clone();
        for record in audit {
            t.apply_unchecked(&record.revision)?;
        }
        Ok(t)
    }
}

/// Free-function form of [`Timeline::next_due`].
pub fn next_due<'a>(timeline: &'a Timeline, participant: &ParticipantId, now: Timestamp) -> Option<&'a Occurrence> {
    timeline.next_due(participant, now)
}
