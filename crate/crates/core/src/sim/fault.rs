//! Deliberate damage to an event log, for exercising the quality checks.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{record_order, EventKind, EventLog, LogRecord};
use crate::context::ParticipantId;
use crate::schedule::OccurrenceRef;
use crate::time::{Date, TimeDelta, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Nothing at all is recorded on this (UTC) date.
    BlackoutDay(Date),
    /// One sensor stops reporting during `[from, to)`.
    SensorDropout { sensor: String, from: Timestamp, to: Timestamp },
    /// Every answer stored by `participant` in `[from, to)` is re-timed into a single minute.
    AnswerBurst { participant: ParticipantId, from: Timestamp, to: Timestamp },
}

pub fn inject_fault(mut log: EventLog, fault: &Fault) -> EventLog {
    match fault {
        Fault::BlackoutDay(day) => log.retain(|r| r.at().date() != *day),
        Fault::SensorDropout { sensor, from, to } => log.retain(|r| match r {
            LogRecord::Sensor(s) => !(s.sensor == *sensor && s.at >= *from && s.at < *to),
            LogRecord::Qa(_) => true,
        }),
        Fault::AnswerBurst { participant, from, to } => burst(&mut log, participant, *from, *to),
    }
    log
}

/// Moves the answers into `[b, b + 60s)` where `b` is the latest delivery
/// among them, so lifecycle order survives the compression.
fn burst(log: &mut EventLog, participant: &ParticipantId, from: Timestamp, to: Timestamp) {
    let mut affected: BTreeMap<OccurrenceRef, Option<Timestamp>> = BTreeMap::new();
    for e in log.iter().filter_map(LogRecord::as_qa) {
        if &e.participant == participant && e.kind == EventKind::AnswerStored && e.at >= from && e.at < to {
            affected.insert(e.occurrence, None);
        }
    }
    if affected.is_empty() {
        return;
    }
    for e in log.iter().filter_map(LogRecord::as_qa) {
        if &e.participant == participant && e.kind == EventKind::QuestionDelivered {
            if let Some(slot) = affected.get_mut(&e.occurrence) {
                *slot = Some(e.at);
            }
        }
    }
    let base = affected.values().flatten().max().copied().unwrap_or(from);
    let n = affected.len() as i64;
    let order: BTreeMap<OccurrenceRef, i64> = affected.keys().enumerate().map(|(i, k)| (*k, i as i64)).collect();
    for r in log.iter_mut() {
        let LogRecord::Qa(e) = r else { continue };
        if &e.participant != participant {
            continue;
        }
        let Some(&i) = order.get(&e.occurrence) else { continue };
        let started = base + TimeDelta::from_millis(i * 50_000 / n);
        match e.kind {
            EventKind::AnswerStarted => e.at = started,
            EventKind::AnswerStored => e.at = started + TimeDelta::from_secs(5),
            _ => {}
        }
    }
    log.sort_by(record_order);
}
