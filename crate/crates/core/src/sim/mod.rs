//! Simulated participants: QA lifecycle events, sensor streams and faults.

pub mod behavior;
pub mod catalog;
pub mod fault;
pub mod ground;
pub mod run;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::context::ParticipantId;
use crate::plan::QCategory;
pub use crate::plan::DiaryOrTask;
use crate::schedule::{CollectionRef, OccurrenceRef};
use crate::time::{TimeDelta, Timestamp};

pub use behavior::{BehaviorModel, CellParams, CellSelector, Distribution};
pub use catalog::{catalog_entry, Cadence, CatalogEntry, SensorGroup, CATALOG};
pub use fault::{inject_fault, Fault};
pub use ground::{truth_label, GroundTruthSpec, ALONE};
pub use run::{run_simulation, SimConfig, SimError};

/// Version written in the header of every event log file.
pub const EVENT_LOG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    QuestionGenerated,
    QuestionDelivered,
    AnswerStarted,
    AnswerStored,
    Missed,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::QuestionGenerated => "QuestionGenerated",
            EventKind::QuestionDelivered => "QuestionDelivered",
            EventKind::AnswerStarted => "AnswerStarted",
            EventKind::AnswerStored => "AnswerStored",
            EventKind::Missed => "Missed",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAEvent {
    pub participant: ParticipantId,
    pub occurrence: OccurrenceRef,
    pub kind: EventKind,
    pub at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    pub diary_or_task: DiaryOrTask,
    pub category: QCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorValue {
    /// Place class reported by location sensors.
    Place(String),
    Label(String),
    Flag(bool),
    Scalar(f64),
    Triple([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub participant: ParticipantId,
    pub sensor: String,
    pub collection: CollectionRef,
    pub at: Timestamp,
    pub value: SensorValue,
    /// The scheduled occurrence that produced the reading; `None` for on-change triggers.
    pub cadence_source: Option<OccurrenceRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Qa(QAEvent),
    Sensor(SensorReading),
}

impl LogRecord {
    pub fn at(&self) -> Timestamp {
        match self {
            LogRecord::Qa(e) => e.at,
            LogRecord::Sensor(r) => r.at,
        }
    }

    pub fn participant(&self) -> &ParticipantId {
        match self {
            LogRecord::Qa(e) => &e.participant,
            LogRecord::Sensor(r) => &r.participant,
        }
    }

    pub fn as_qa(&self) -> Option<&QAEvent> {
        match self {
            LogRecord::Qa(e) => Some(e),
            LogRecord::Sensor(_) => None,
        }
    }

    pub fn as_sensor(&self) -> Option<&SensorReading> {
        match self {
            LogRecord::Sensor(r) => Some(r),
            LogRecord::Qa(_) => None,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            LogRecord::Qa(e) => e.kind as u8,
            LogRecord::Sensor(_) => 5,
        }
    }
}

/// Total order used for merged logs: time, participant, kind, then source.
pub fn record_order(a: &LogRecord, b: &LogRecord) -> Ordering {
    a.at()
        .cmp(&b.at())
        .then_with(|| a.participant().cmp(b.participant()))
        .then_with(|| a.kind_rank().cmp(&b.kind_rank()))
        .then_with(|| match (a, b) {
            (LogRecord::Qa(x), LogRecord::Qa(y)) => x.occurrence.cmp(&y.occurrence),
            (LogRecord::Sensor(x), LogRecord::Sensor(y)) => {
                x.collection.cmp(&y.collection).then_with(|| x.sensor.cmp(&y.sensor))
            }
            _ => Ordering::Equal,
        })
}

/// An append-only list of records in [`record_order`].
pub type EventLog = Vec<LogRecord>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimingMetrics {
    /// AnswerStarted − Delivered.
    pub reaction_time: Option<TimeDelta>,
    /// AnswerStored − AnswerStarted.
    pub completion_time: Option<TimeDelta>,
    /// AnswerStored − Generated.
    pub delay: Option<TimeDelta>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifecycleError {
    #[error("{participant} {occurrence}: {kind} recorded twice")]
    Duplicate { participant: ParticipantId, occurrence: OccurrenceRef, kind: EventKind },
    #[error("{participant} {occurrence}: {kind} at {at} precedes an earlier lifecycle stage")]
    OutOfOrder { participant: ParticipantId, occurrence: OccurrenceRef, kind: EventKind, at: Timestamp },
    #[error("{participant} {occurrence}: both Missed and AnswerStored")]
    MissedAndStored { participant: ParticipantId, occurrence: OccurrenceRef },
    #[error("{participant} {occurrence}: {kind} without the preceding {requires}")]
    MissingStage { participant: ParticipantId, occurrence: OccurrenceRef, kind: EventKind, requires: EventKind },
    #[error("{participant} {occurrence}: never delivered")]
    NotDelivered { participant: ParticipantId, occurrence: OccurrenceRef },
}

/// Every QA event of one occurrence for one participant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lifecycle {
    pub participant: ParticipantId,
    pub occurrence: OccurrenceRef,
    pub category: QCategory,
    pub diary_or_task: DiaryOrTask,
    pub generated: Option<Timestamp>,
    pub delivered: Option<Timestamp>,
    pub started: Option<Timestamp>,
    pub stored: Option<Timestamp>,
    pub missed: Option<Timestamp>,
    pub answer: Option<String>,
    /// Log index of each stage's event, indexed by `EventKind as usize`.
    pub index: [Option<usize>; 5],
}

impl Lifecycle {
    fn new(e: &QAEvent) -> Self {
        Self {
            participant: e.participant.clone(),
            occurrence: e.occurrence,
            category: e.category,
            diary_or_task: e.diary_or_task,
            generated: None,
            delivered: None,
            started: None,
            stored: None,
            missed: None,
            answer: None,
            index: [None; 5],
        }
    }

    fn slot(&mut self, kind: EventKind) -> &mut Option<Timestamp> {
        match kind {
            EventKind::QuestionGenerated => &mut self.generated,
            EventKind::QuestionDelivered => &mut self.delivered,
            EventKind::AnswerStarted => &mut self.started,
            EventKind::AnswerStored => &mut self.stored,
            EventKind::Missed => &mut self.missed,
        }
    }

    fn push(&mut self, idx: usize, e: &QAEvent) -> Result<(), LifecycleError> {
        let slot = self.slot(e.kind);
        if slot.is_some() {
            return Err(LifecycleError::Duplicate { participant: e.participant.clone(), occurrence: e.occurrence, kind: e.kind });
        }
        *slot = Some(e.at);
        if e.kind == EventKind::AnswerStored {
            self.answer = e.payload.clone();
        }
        self.index[e.kind as usize] = Some(idx);
        Ok(())
    }

    /// Checks `Generated ≤ Delivered ≤ AnswerStarted ≤ AnswerStored` and that
    /// Missed excludes AnswerStored. Stages may be absent (a fault may have
    /// removed them) but present stages must be ordered.
    pub fn check(&self) -> Result<(), LifecycleError> {
        let stages = [
            (EventKind::QuestionGenerated, self.generated),
            (EventKind::QuestionDelivered, self.delivered),
            (EventKind::AnswerStarted, self.started),
            (EventKind::AnswerStored, self.stored),
        ];
        let mut latest: Option<Timestamp> = None;
        for (kind, at) in stages {
            if let Some(at) = at {
                if latest.is_some_and(|l| at < l) {
                    return Err(self.out_of_order(kind, at));
                }
                latest = Some(at);
            }
        }
        if let (Some(missed), Some(delivered)) = (self.missed, self.delivered) {
            if missed < delivered {
                return Err(self.out_of_order(EventKind::Missed, missed));
            }
        }
        if self.missed.is_some() && self.stored.is_some() {
            return Err(LifecycleError::MissedAndStored { participant: self.participant.clone(), occurrence: self.occurrence });
        }
        Ok(())
    }

    /// Like [`check`](Self::check) but also requires each stage's predecessor,
    /// the contract for freshly ingested batches.
    pub fn check_complete(&self) -> Result<(), LifecycleError> {
        self.check()?;
        let needs = [
            (EventKind::QuestionDelivered, self.delivered.is_some(), EventKind::QuestionGenerated, self.generated.is_some()),
            (EventKind::AnswerStarted, self.started.is_some(), EventKind::QuestionDelivered, self.delivered.is_some()),
            (EventKind::AnswerStored, self.stored.is_some(), EventKind::AnswerStarted, self.started.is_some()),
        ];
        for (kind, present, requires, has) in needs {
            if present && !has {
                return Err(LifecycleError::MissingStage {
                    participant: self.participant.clone(),
                    occurrence: self.occurrence,
                    kind,
                    requires,
                });
            }
        }
        Ok(())
    }

    fn out_of_order(&self, kind: EventKind, at: Timestamp) -> LifecycleError {
        LifecycleError::OutOfOrder { participant: self.participant.clone(), occurrence: self.occurrence, kind, at }
    }

    pub fn index_of(&self, kind: EventKind) -> Option<usize> {
        self.index[kind as usize]
    }

    /// Any one log index of this lifecycle.
    pub fn any_index(&self) -> usize {
        self.index.iter().flatten().copied().next().expect("a lifecycle has at least one event")
    }

    pub fn is_answered(&self) -> bool {
        self.stored.is_some()
    }

    pub fn timing(&self) -> Result<TimingMetrics, LifecycleError> {
        self.check()?;
        if self.delivered.is_none() {
            return Err(LifecycleError::NotDelivered { participant: self.participant.clone(), occurrence: self.occurrence });
        }
        let diff = |a: Option<Timestamp>, b: Option<Timestamp>| Some(a? - b?);
        Ok(TimingMetrics {
            reaction_time: diff(self.started, self.delivered),
            completion_time: diff(self.stored, self.started),
            delay: diff(self.stored, self.generated),
        })
    }
}

/// Groups QA events by `(participant, occurrence)`. Fails on duplicated stages.
pub fn lifecycles(log: &[LogRecord]) -> Result<BTreeMap<(ParticipantId, OccurrenceRef), Lifecycle>, LifecycleError> {
    let mut out: BTreeMap<(ParticipantId, OccurrenceRef), Lifecycle> = BTreeMap::new();
    for (idx, e) in log.iter().enumerate().filter_map(|(i, r)| Some((i, r.as_qa()?))) {
        out.entry((e.participant.clone(), e.occurrence)).or_insert_with(|| Lifecycle::new(e)).push(idx, e)?;
    }
    Ok(out)
}

/// Like [`lifecycles`] but keeps the first of any duplicated stage, for
/// monitoring logs that may have been damaged.
pub fn lifecycles_lossy(log: &[LogRecord]) -> BTreeMap<(ParticipantId, OccurrenceRef), Lifecycle> {
    let mut out: BTreeMap<(ParticipantId, OccurrenceRef), Lifecycle> = BTreeMap::new();
    for (idx, e) in log.iter().enumerate().filter_map(|(i, r)| Some((i, r.as_qa()?))) {
        let _ = out.entry((e.participant.clone(), e.occurrence)).or_insert_with(|| Lifecycle::new(e)).push(idx, e);
    }
    out
}

/// Reaction, completion and delay of one occurrence.
pub fn derive_timing(
    log: &[LogRecord],
    participant: &ParticipantId,
    occurrence: &OccurrenceRef,
) -> Result<TimingMetrics, LifecycleError> {
    let mut cycle: Option<Lifecycle> = None;
    for (idx, e) in log.iter().enumerate().filter_map(|(i, r)| Some((i, r.as_qa()?))) {
        if &e.participant == participant && &e.occurrence == occurrence {
            cycle.get_or_insert_with(|| Lifecycle::new(e)).push(idx, e)?;
        }
    }
    match cycle {
        Some(c) => c.timing(),
        None => Err(LifecycleError::NotDelivered { participant: participant.clone(), occurrence: *occurrence }),
    }
}
