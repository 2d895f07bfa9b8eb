//! Runtime revisions under the researcher → participant → platform hierarchy.
//!
//! Researchers are unrestricted. Participants may only touch their own
//! schedule, within the shift and daily-cancel bounds of the
//! [`RevisionPolicy`], and never on frozen collections. The platform acts on a
//! single participant's schedule and is bounded by the researcher policy and by
//! whatever window that participant granted it. Nobody rewrites the past.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{collection_entries, entry_order, expand, CollectionRef, OccurrenceRef, Timeline, TimelineEntry};
use crate::context::ParticipantId;
use crate::plan::{Frequency, RecurrenceRule};
use crate::time::{TimeDelta, Timestamp, MS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Researcher,
    Participant(ParticipantId),
    Platform,
}

impl Actor {
    fn rank(&self) -> &'static str {
        match self {
            Actor::Researcher => "researcher",
            Actor::Participant(_) => "participant",
            Actor::Platform => "platform",
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Participant(p) => write!(f, "participant {p}"),
            other => f.write_str(other.rank()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionTarget {
    Occurrence(OccurrenceRef),
    Collection(CollectionRef),
    /// Every occurrence scheduled in `[from, to)`.
    Span { from: Timestamp, to: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    Shift(TimeDelta),
    Cancel,
    FrequencyOverride(RecurrenceRule),
    Reinstate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub actor: Actor,
    /// Whose schedule is revised; `None` means every participant.
    pub participant: Option<ParticipantId>,
    pub target: RevisionTarget,
    pub change: Change,
    pub issued_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionPolicy {
    pub max_participant_shift: TimeDelta,
    pub max_participant_cancels_per_day: u32,
    pub platform_shift_window: TimeDelta,
    #[serde(default)]
    pub frozen_collections: BTreeSet<CollectionRef>,
    /// Narrower platform windows granted by individual participants.
    #[serde(default)]
    pub participant_platform_windows: BTreeMap<ParticipantId, TimeDelta>,
}

impl Default for RevisionPolicy {
    fn default() -> Self {
        Self {
            max_participant_shift: TimeDelta::from_minutes(60),
            max_participant_cancels_per_day: 4,
            platform_shift_window: TimeDelta::from_minutes(30),
            frozen_collections: BTreeSet::new(),
            participant_platform_windows: BTreeMap::new(),
        }
    }
}

impl RevisionPolicy {
    pub fn check(&self) -> Result<(), &'static str> {
        let negative = self.max_participant_shift.is_negative()
            || self.platform_shift_window.is_negative()
            || self.participant_platform_windows.values().any(|w| w.is_negative());
        if negative {
            return Err("policy durations must be non-negative");
        }
        Ok(())
    }

    /// Largest shift the platform may apply to this participant's schedule.
    pub fn platform_window(&self, participant: &ParticipantId) -> TimeDelta {
        let mut w = self.platform_shift_window.min(self.max_participant_shift);
        if let Some(granted) = self.participant_platform_windows.get(participant) {
            w = w.min(*granted);
        }
        w
    }
}

/// The bound a rejected revision ran into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    ShiftBound { max: TimeDelta, requested: TimeDelta },
    DailyCancelQuota { max: u32, date: crate::time::Date },
    FrozenCollection(CollectionRef),
    OwnScheduleOnly,
    FrequencyIncrease,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::ShiftBound { max, requested } => write!(f, "shift of {requested} exceeds bound {max}"),
            Limit::DailyCancelQuota { max, date } => write!(f, "more than {max} cancellations on {date}"),
            Limit::FrozenCollection(c) => write!(f, "collection {c} is frozen"),
            Limit::OwnScheduleOnly => f.write_str("revision must target a single participant's own schedule"),
            Limit::FrequencyIncrease => f.write_str("only the researcher may increase a collection's frequency"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RevisionError {
    #[error("{actor} revision rejected: {limit}")]
    PolicyViolation { actor: Actor, limit: Limit },
    #[error("occurrence {target} at {scheduled_at} is not after revision time {issued_at}")]
    ImmutablePast { target: OccurrenceRef, scheduled_at: Timestamp, issued_at: Timestamp },
    #[error("revision target not found: {0}")]
    UnknownTarget(alloc::string::String),
    #[error("unknown participant {0}")]
    UnknownParticipant(ParticipantId),
    #[error("invalid revision: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditNote {
    /// A collection the participant had rejected was turned back on.
    ReinstatedRejectedCollection(CollectionRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub revision: Revision,
    pub affected: u64,
    #[serde(default)]
    pub notes: Vec<AuditNote>,
}

/// Free-function form of [`Timeline::apply_revision`].
pub fn apply_revision(mut timeline: Timeline, rev: Revision, policy: &RevisionPolicy) -> Result<Timeline, RevisionError> {
    timeline.apply_revision(rev, policy)?;
    Ok(timeline)
}

/// One concrete edit, computed before anything is mutated.
struct Edit {
    participant: ParticipantId,
    /// Indices into the participant's entries.
    indices: Vec<usize>,
}

fn nominal_step_ms(rule: &RecurrenceRule) -> i64 {
    let unit = rule.frequency.fixed_millis().unwrap_or(match rule.frequency {
        Frequency::Monthly => 30 * MS_PER_DAY,
        _ => 365 * MS_PER_DAY,
    });
    unit.saturating_mul(rule.interval as i64)
}

impl Timeline {
    /// Checks `rev` against the hierarchy and `policy`, then applies it and
    /// appends an audit record. On error the timeline is unchanged.
    pub fn apply_revision(&mut self, rev: Revision, policy: &RevisionPolicy) -> Result<&AuditRecord, RevisionError> {
        policy.check().map_err(RevisionError::Invalid)?;
        let edits = self.resolve(&rev)?;
        self.check_policy(&rev, &edits, policy)?;
        self.commit(rev, edits)
    }

    pub(crate) fn apply_unchecked(&mut self, rev: &Revision) -> Result<(), RevisionError> {
        let edits = self.resolve(rev)?;
        self.commit(rev.clone(), edits).map(|_| ())
    }

    fn scope(&self, rev: &Revision) -> Result<Vec<ParticipantId>, RevisionError> {
        match &rev.participant {
            Some(p) if self.schedules.contains_key(p) => Ok(alloc::vec![p.clone()]),
            Some(p) => Err(RevisionError::UnknownParticipant(p.clone())),
            None => Ok(self.schedules.keys().cloned().collect()),
        }
    }

    fn resolve(&self, rev: &Revision) -> Result<Vec<Edit>, RevisionError> {
        let scope = self.scope(rev)?;
        if let RevisionTarget::Collection(c) = &rev.target {
            if !self.collections.contains_key(c) {
                return Err(RevisionError::UnknownTarget(alloc::format!("{c}")));
            }
        }
        if matches!(rev.change, Change::FrequencyOverride(_)) && !matches!(rev.target, RevisionTarget::Collection(_)) {
            return Err(RevisionError::Invalid("a frequency override must target a collection"));
        }
        let mut edits = Vec::new();
        for p in scope {
            let entries = &self.schedules[&p];
            let indices: Vec<usize> = match &rev.target {
                RevisionTarget::Occurrence(r) => {
                    let idx = entries
                        .iter()
                        .position(|e| e.occurrence.reference() == *r)
                        .ok_or_else(|| RevisionError::UnknownTarget(alloc::format!("{r} for {p}")))?;
                    let at = entries[idx].occurrence.scheduled_at;
                    if at < rev.issued_at {
                        return Err(RevisionError::ImmutablePast { target: *r, scheduled_at: at, issued_at: rev.issued_at });
                    }
                    alloc::vec![idx]
                }
                RevisionTarget::Collection(c) => entries
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.occurrence.source == *c && e.occurrence.scheduled_at >= rev.issued_at)
                    .map(|(i, _)| i)
                    .collect(),
                RevisionTarget::Span { from, to } => {
                    if from >= to {
                        return Err(RevisionError::Invalid("span start must precede its end"));
                    }
                    let lo = (*from).max(rev.issued_at);
                    entries
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.occurrence.scheduled_at >= lo && e.occurrence.scheduled_at < *to)
                        .map(|(i, _)| i)
                        .collect()
                }
            };
            let indices = match rev.change {
                Change::Cancel => indices.into_iter().filter(|&i| !entries[i].cancelled).collect(),
                Change::Reinstate | Change::FrequencyOverride(_) => indices,
                Change::Shift(delta) => {
                    for &i in &indices {
                        let occ = &entries[i].occurrence;
                        let moved = occ.scheduled_at + delta;
                        if moved < rev.issued_at {
                            return Err(RevisionError::ImmutablePast {
                                target: occ.reference(),
                                scheduled_at: moved,
                                issued_at: rev.issued_at,
                            });
                        }
                        let spec = &self.collections[&occ.source];
                        if moved < spec.dtstart || moved >= spec.dtend {
                            return Err(RevisionError::Invalid("shift moves an occurrence outside its collection window"));
                        }
                    }
                    indices
                }
            };
            edits.push(Edit { participant: p, indices });
        }
        Ok(edits)
    }

    fn check_policy(&self, rev: &Revision, edits: &[Edit], policy: &RevisionPolicy) -> Result<(), RevisionError> {
        let subject = match &rev.actor {
            Actor::Researcher => return Ok(()),
            Actor::Participant(p) => {
                if rev.participant.as_ref() != Some(p) {
                    return Err(violation(rev, Limit::OwnScheduleOnly));
                }
                p
            }
            Actor::Platform => rev.participant.as_ref().ok_or_else(|| violation(rev, Limit::OwnScheduleOnly))?,
        };
        let entries = &self.schedules[subject];
        let touched: BTreeSet<CollectionRef> = match &rev.target {
            RevisionTarget::Collection(c) => [*c].into(),
            _ => edits.iter().flat_map(|e| e.indices.iter().map(|&i| entries[i].occurrence.source)).collect(),
        };
        if let Some(frozen) = touched.iter().find(|c| policy.frozen_collections.contains(c)) {
            return Err(violation(rev, Limit::FrozenCollection(*frozen)));
        }
        match &rev.change {
            Change::Shift(delta) => {
                let max = match rev.actor {
                    Actor::Platform => policy.platform_window(subject),
                    _ => policy.max_participant_shift,
                };
                if delta.abs() > max {
                    return Err(violation(rev, Limit::ShiftBound { max, requested: *delta }));
                }
            }
            Change::Cancel => {
                let mut per_day: BTreeMap<crate::time::Date, u32> = BTreeMap::new();
                for edit in edits {
                    for &i in &edit.indices {
                        *per_day.entry(entries[i].occurrence.scheduled_at.date()).or_default() += 1;
                    }
                }
                for (date, n) in per_day {
                    let already = self.cancel_tally.get(&(subject.clone(), date)).copied().unwrap_or(0);
                    if already + n > policy.max_participant_cancels_per_day {
                        return Err(violation(rev, Limit::DailyCancelQuota { max: policy.max_participant_cancels_per_day, date }));
                    }
                }
            }
            Change::FrequencyOverride(rule) => {
                let RevisionTarget::Collection(c) = &rev.target else { unreachable!() };
                if nominal_step_ms(rule) < nominal_step_ms(&self.collections[c].rrule) {
                    return Err(violation(rev, Limit::FrequencyIncrease));
                }
            }
            Change::Reinstate => {}
        }
        Ok(())
    }

    fn commit(&mut self, rev: Revision, edits: Vec<Edit>) -> Result<&AuditRecord, RevisionError> {
        let mut affected = 0u64;
        let mut notes = Vec::new();
        let counts_toward_quota = !matches!(rev.actor, Actor::Researcher);
        for edit in edits {
            let spec_target = match &rev.target {
                RevisionTarget::Collection(c) => Some((*c, self.collections[c].clone())),
                _ => None,
            };
            let schedule = self.schedules.get_mut(&edit.participant).expect("resolved participant");
            let entries = Arc::make_mut(schedule);
            match &rev.change {
                Change::Shift(delta) => {
                    for &i in &edit.indices {
                        let occ = &mut entries[i].occurrence;
                        occ.scheduled_at += *delta;
                        occ.window_end += *delta;
                    }
                    affected += edit.indices.len() as u64;
                }
                Change::Cancel => {
                    for &i in &edit.indices {
                        entries[i].cancelled = true;
                        if counts_toward_quota {
                            let day = entries[i].occurrence.scheduled_at.date();
                            *self.cancel_tally.entry((edit.participant.clone(), day)).or_default() += 1;
                        }
                    }
                    affected += edit.indices.len() as u64;
                }
                Change::Reinstate => {
                    let mut n = 0;
                    for &i in &edit.indices {
                        if entries[i].cancelled {
                            entries[i].cancelled = false;
                            n += 1;
                        }
                    }
                    if let Some((c, spec)) = spec_target.filter(|(_, s)| !s.accepted) {
                        if edit.indices.is_empty() {
                            let from = spec.dtstart.max(rev.issued_at);
                            let all = expand::expand(&spec.rrule, spec.dtstart, spec.dtend).unwrap_or_default();
                            let first = all.partition_point(|t| *t < from);
                            let added: Vec<TimelineEntry> =
                                collection_entries(c, &all[first..], first as u64, spec.dtend).collect();
                            n += added.len();
                            entries.extend(added);
                            if !notes.contains(&AuditNote::ReinstatedRejectedCollection(c)) {
                                notes.push(AuditNote::ReinstatedRejectedCollection(c));
                            }
                        }
                    }
                    affected += n as u64;
                }
                Change::FrequencyOverride(rule) => {
                    let (c, spec) = spec_target.expect("override targets a collection");
                    let removed: BTreeSet<usize> = edit.indices.iter().copied().collect();
                    let anchor = edit
                        .indices
                        .iter()
                        .map(|&i| entries[i].occurrence.scheduled_at)
                        .min()
                        .unwrap_or(rev.issued_at)
                        .max(spec.dtstart);
                    let next_seq = entries
                        .iter()
                        .enumerate()
                        .filter(|(i, e)| e.occurrence.source == c && !removed.contains(i))
                        .map(|(_, e)| e.occurrence.seq_no + 1)
                        .max()
                        .unwrap_or(0);
                    let mut i = 0;
                    entries.retain(|_| {
                        let keep = !removed.contains(&i);
                        i += 1;
                        keep
                    });
                    if anchor < spec.dtend {
                        let instants = expand::expand(rule, anchor, spec.dtend)
                            .map_err(|_| RevisionError::Invalid("override rule cannot be expanded"))?;
                        affected += instants.len() as u64;
                        entries.extend(collection_entries(c, &instants, next_seq, spec.dtend));
                    }
                }
            }
            entries.sort_by(entry_order);
        }
        self.version += 1;
        let seq = self.audit.len() as u64;
        self.audit.push(AuditRecord { seq, revision: rev, affected, notes });
        Ok(self.audit.last().expect("just pushed"))
    }
}

fn violation(rev: &Revision, limit: Limit) -> RevisionError {
    RevisionError::PolicyViolation { actor: rev.actor.clone(), limit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ParticipantProfile;
    use crate::plan::*;
    use crate::schedule::{compile, CollectionKind};
    use alloc::vec;

    fn day0() -> Timestamp {
        Timestamp::ymd_hms(2020, 11, 2, 0, 0, 0)
    }

    fn timeline() -> Timeline {
        let q = QuestionCollection {
            cid: 1,
            dtstart: day0(),
            dtend: day0() + TimeDelta::from_days(4),
            status: true,
            rrule: RecurrenceRule::new(Frequency::Minute, 30, 192),
            question: Question {
                qid: 1,
                qcategory: QCategory::WE,
                question_content: "Where are you?".into(),
                answer_options: vec!["Home".into(), "Library".into()],
                qtype: QType::SingleChoice,
                answer_content: None,
            },
            extensions: vec![],
        };
        let plan = ExperimentPlan {
            user: "u".into(),
            calendars: vec![Calendar {
                calendar_id: 1,
                context_collections: vec![ContextCollection {
                    id: 1,
                    question_collections: vec![q],
                    sensor_collections: vec![],
                    extensions: vec![],
                }],
                extensions: vec![],
            }],
        };
        let people: Vec<_> = ["a", "b"].iter().map(|p| ParticipantProfile::new(*p, "F", "BSc", "S", "UTC")).collect();
        compile(&plan, &people).unwrap()
    }

    fn coll() -> CollectionRef {
        CollectionRef::question(1, 1, 1)
    }

    fn occ(seq: u64) -> OccurrenceRef {
        OccurrenceRef { collection: coll(), seq_no: seq }
    }

    #[test]
    fn researcher_cancels_a_day() {
        let mut t = timeline();
        let from = day0() + TimeDelta::from_days(1);
        let rev = Revision {
            actor: Actor::Researcher,
            participant: None,
            target: RevisionTarget::Span { from, to: from + TimeDelta::from_days(1) },
            change: Change::Cancel,
            issued_at: day0(),
        };
        let before = t.audit().len();
        t.apply_revision(rev, &RevisionPolicy::default()).unwrap();
        assert_eq!(t.audit().len(), before + 1);
        let a: ParticipantId = "a".into();
        let cancelled: Vec<_> = t.entries(&a).iter().filter(|e| e.cancelled).collect();
        assert_eq!(cancelled.len(), 48);
        assert!(cancelled.iter().all(|e| e.occurrence.scheduled_at.date() == from.date()));
    }

    #[test]
    fn participant_shift_over_bound() {
        let mut t = timeline();
        let rev = Revision {
            actor: Actor::Participant("a".into()),
            participant: Some("a".into()),
            target: RevisionTarget::Occurrence(occ(10)),
            change: Change::Shift(TimeDelta::from_hours(2)),
            issued_at: day0(),
        };
        let err = t.apply_revision(rev, &RevisionPolicy::default()).unwrap_err();
        assert!(matches!(err, RevisionError::PolicyViolation { limit: Limit::ShiftBound { .. }, .. }));
        assert_eq!(t.version(), 0);
    }

    #[test]
    fn platform_shift_within_window() {
        let mut t = timeline();
        let b: ParticipantId = "b".into();
        let original = t.entries(&b).iter().find(|e| e.occurrence.seq_no == 20).unwrap().occurrence;
        let rev = Revision {
            actor: Actor::Platform,
            participant: Some(b.clone()),
            target: RevisionTarget::Occurrence(occ(20)),
            change: Change::Shift(TimeDelta::from_minutes(-15)),
            issued_at: day0(),
        };
        t.apply_revision(rev, &RevisionPolicy::default()).unwrap();
        let moved = t.entries(&b).iter().find(|e| e.occurrence.seq_no == 20).unwrap().occurrence;
        assert_eq!(moved.scheduled_at, original.scheduled_at - TimeDelta::from_minutes(15));
        // the shifted instant sits strictly between the recomputed neighbours
        let grid = expand::expand(&RecurrenceRule::new(Frequency::Minute, 30, 192), day0(), day0() + TimeDelta::from_days(4)).unwrap();
        assert!(grid[19] < moved.scheduled_at && moved.scheduled_at < grid[20]);
        // other participant untouched
        assert_eq!(t.entries(&"a".into()).iter().find(|e| e.occurrence.seq_no == 20).unwrap().occurrence, original);
    }

    #[test]
    fn past_is_immutable() {
        let mut t = timeline();
        let rev = Revision {
            actor: Actor::Researcher,
            participant: Some("a".into()),
            target: RevisionTarget::Occurrence(occ(0)),
            change: Change::Cancel,
            issued_at: day0() + TimeDelta::from_hours(1),
        };
        assert!(matches!(t.apply_revision(rev, &RevisionPolicy::default()), Err(RevisionError::ImmutablePast { .. })));
    }

    #[test]
    fn participant_cannot_touch_others() {
        let mut t = timeline();
        let rev = Revision {
            actor: Actor::Participant("a".into()),
            participant: Some("b".into()),
            target: RevisionTarget::Occurrence(occ(5)),
            change: Change::Cancel,
            issued_at: day0(),
        };
        assert!(matches!(
            t.apply_revision(rev, &RevisionPolicy::default()),
            Err(RevisionError::PolicyViolation { limit: Limit::OwnScheduleOnly, .. })
        ));
    }

    #[test]
    fn frequency_override_halves_remaining() {
        let mut t = timeline();
        let issued = day0() + TimeDelta::from_days(2);
        let rev = Revision {
            actor: Actor::Researcher,
            participant: None,
            target: RevisionTarget::Collection(coll()),
            change: Change::FrequencyOverride(RecurrenceRule::new(Frequency::Hour, 1, 1000)),
            issued_at: issued,
        };
        t.apply_revision(rev, &RevisionPolicy::default()).unwrap();
        let a: ParticipantId = "a".into();
        let after = t.occurrences(&a).filter(|o| o.scheduled_at >= issued).count();
        let before = t.occurrences(&a).filter(|o| o.scheduled_at < issued).count();
        assert_eq!(before, 96);
        assert_eq!(after, 48);
    }

    #[test]
    fn reinstating_rejected_collection_is_noted() {
        let mut t = timeline();
        t.collections.get_mut(&coll()).unwrap().accepted = false;
        for s in t.schedules.values_mut() {
            Arc::make_mut(s).clear();
        }
        let rev = Revision {
            actor: Actor::Participant("a".into()),
            participant: Some("a".into()),
            target: RevisionTarget::Collection(coll()),
            change: Change::Reinstate,
            issued_at: day0() + TimeDelta::from_days(3),
        };
        let record = t.apply_revision(rev, &RevisionPolicy::default()).unwrap().clone();
        assert_eq!(record.notes, vec![AuditNote::ReinstatedRejectedCollection(coll())]);
        assert_eq!(t.occurrences(&"a".into()).count(), 48);
        assert!(t.occurrences(&"a".into()).all(|o| o.source.kind == CollectionKind::Question));
        assert_eq!(t.occurrences(&"b".into()).count(), 0);
    }

    #[test]
    fn replay_reproduces_state() {
        let compiled = timeline();
        let mut t = compiled.clone();
        let policy = RevisionPolicy::default();
        let revs = [
            Revision {
                actor: Actor::Participant("a".into()),
                participant: Some("a".into()),
                target: RevisionTarget::Occurrence(occ(40)),
                change: Change::Cancel,
                issued_at: day0(),
            },
            Revision {
                actor: Actor::Platform,
                participant: Some("b".into()),
                target: RevisionTarget::Occurrence(occ(41)),
                change: Change::Shift(TimeDelta::from_minutes(10)),
                issued_at: day0(),
            },
            Revision {
                actor: Actor::Researcher,
                participant: None,
                target: RevisionTarget::Collection(coll()),
                change: Change::FrequencyOverride(RecurrenceRule::new(Frequency::Hour, 2, 100)),
                issued_at: day0() + TimeDelta::from_days(3),
            },
        ];
        for r in revs {
            t.apply_revision(r, &policy).unwrap();
        }
        let replayed = Timeline::replay(&compiled, t.audit()).unwrap();
        assert_eq!(replayed, t);
    }
}
