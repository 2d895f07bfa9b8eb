//! Rule-based data-quality checks over an event log snapshot.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::{ParticipantId, IMPLAUSIBLE_PAIRS};
use crate::plan::QCategory;
use crate::schedule::{CollectionKind, CollectionRef, Timeline};
use crate::sim::catalog::is_on_change;
use crate::sim::run::UNKNOWN_PLACE;
use crate::sim::{lifecycles_lossy, EventKind, Lifecycle, LogRecord, SensorValue};
use crate::time::{Date, TimeDelta, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlagKind {
    MissingDay,
    ImplausibleAnswer,
    AnswerBurst,
    SensorGap,
    LocationMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityFlag {
    /// `None` for experiment-wide flags.
    pub participant: Option<ParticipantId>,
    pub kind: FlagKind,
    /// Indices into the checked log; never empty.
    pub evidence: Vec<usize>,
    pub at: Timestamp,
    pub detail: String,
}

/// Which simulated place classes each spatial answer is compatible with.
/// Every label is compatible with itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationCompatibility {
    pub allowed: BTreeMap<String, Vec<String>>,
}

impl LocationCompatibility {
    pub fn compatible(&self, answer: &str, place: &str) -> bool {
        answer.eq_ignore_ascii_case(place)
            || self
                .allowed
                .iter()
                .any(|(a, ps)| a.eq_ignore_ascii_case(answer) && ps.iter().any(|p| p.eq_ignore_ascii_case(place)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub burst_count: usize,
    pub burst_window: TimeDelta,
    /// SensorGap fires after more than this many consecutive missed occurrences.
    pub sensor_gap: u64,
    /// Slack around `[delivered, stored]` when looking for location readings.
    pub location_slack: TimeDelta,
    pub compatibility: LocationCompatibility,
    /// `(activity, place)` pairs that cannot hold together.
    pub implausible: Vec<(String, String)>,
    /// Answers delivered this close together describe the same moment.
    pub same_moment: TimeDelta,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            burst_count: 10,
            burst_window: TimeDelta::from_secs(60),
            sensor_gap: 30,
            location_slack: TimeDelta::from_minutes(2),
            compatibility: LocationCompatibility::default(),
            implausible: IMPLAUSIBLE_PAIRS.iter().map(|(a, p)| (String::from(*a), String::from(*p))).collect(),
            same_moment: TimeDelta::from_minutes(5),
        }
    }
}

/// Runs every rule. `timeline` enables the SensorGap rule. The log must be in
/// record order; flags come back sorted by time, kind and participant.
pub fn run_quality_checks(log: &[LogRecord], timeline: Option<&Timeline>, config: &CheckConfig) -> Vec<QualityFlag> {
    let mut flags = Vec::new();
    if log.is_empty() {
        return flags;
    }
    let cycles = lifecycles_lossy(log);
    let mut by_participant: BTreeMap<&ParticipantId, Vec<&Lifecycle>> = BTreeMap::new();
    for ((p, _), c) in &cycles {
        by_participant.entry(p).or_default().push(c);
    }
    missing_days(log, &mut flags);
    for (p, cs) in &by_participant {
        answer_bursts(p, cs, config, &mut flags);
        implausible_answers(p, cs, config, &mut flags);
    }
    location_mismatches(log, &by_participant, config, &mut flags);
    if let Some(t) = timeline {
        sensor_gaps(log, t, config, &mut flags);
    }
    flags.sort_by(|a, b| (a.at, a.kind, &a.participant).cmp(&(b.at, b.kind, &b.participant)));
    flags
}

fn missing_days(log: &[LogRecord], flags: &mut Vec<QualityFlag>) {
    let first = log[0].at().date();
    let last = log[log.len() - 1].at().date();
    let active: BTreeSet<Date> = log.iter().map(|r| r.at().date()).collect();
    let mut day = first;
    while day <= last {
        if !active.contains(&day) {
            let after = log.partition_point(|r| r.at() < day.start());
            flags.push(QualityFlag {
                participant: None,
                kind: FlagKind::MissingDay,
                evidence: alloc::vec![after - 1, after],
                at: day.start(),
                detail: format!("no records on {day}"),
            });
        }
        day = day.succ();
    }
}

fn answer_bursts(p: &ParticipantId, cycles: &[&Lifecycle], config: &CheckConfig, flags: &mut Vec<QualityFlag>) {
    let mut stored: Vec<(Timestamp, usize)> =
        cycles.iter().filter_map(|c| Some((c.stored?, c.index_of(EventKind::AnswerStored)?))).collect();
    stored.sort_unstable();
    let n = stored.len();
    let k = config.burst_count.max(1);
    if n < k {
        return;
    }
    // mark every answer that sits in some window of k answers spanning <= burst_window
    let mut marked = alloc::vec![false; n];
    for i in 0..=n - k {
        if stored[i + k - 1].0 - stored[i].0 <= config.burst_window {
            marked[i..i + k].iter_mut().for_each(|m| *m = true);
        }
    }
    let mut i = 0;
    while i < n {
        if !marked[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && marked[i + 1] && stored[i + 1].0 - stored[i].0 <= config.burst_window {
            i += 1;
        }
        let cluster = &stored[start..=i];
        flags.push(QualityFlag {
            participant: Some(p.clone()),
            kind: FlagKind::AnswerBurst,
            evidence: cluster.iter().map(|&(_, idx)| idx).collect(),
            at: cluster[0].0,
            detail: format!("{} answers stored between {} and {}", cluster.len(), cluster[0].0, cluster[cluster.len() - 1].0),
        });
        i += 1;
    }
}

fn implausible_answers(p: &ParticipantId, cycles: &[&Lifecycle], config: &CheckConfig, flags: &mut Vec<QualityFlag>) {
    let answers = |cat: QCategory| -> Vec<(Timestamp, &str, usize)> {
        let mut v: Vec<_> = cycles
            .iter()
            .filter(|c| c.category == cat)
            .filter_map(|c| Some((c.delivered?, c.answer.as_deref()?, c.index_of(EventKind::AnswerStored)?)))
            .collect();
        v.sort_unstable();
        v
    };
    let places = answers(QCategory::WE);
    for (delivered, activity, a_idx) in answers(QCategory::WA) {
        let lo = places.partition_point(|x| x.0 < delivered - config.same_moment);
        for &(other, place, p_idx) in places[lo..].iter().take_while(|x| x.0 <= delivered + config.same_moment) {
            let bad = config
                .implausible
                .iter()
                .any(|(a, pl)| a.eq_ignore_ascii_case(activity) && pl.eq_ignore_ascii_case(place));
            if bad {
                flags.push(QualityFlag {
                    participant: Some(p.clone()),
                    kind: FlagKind::ImplausibleAnswer,
                    evidence: alloc::vec![a_idx.min(p_idx), a_idx.max(p_idx)],
                    at: delivered.min(other),
                    detail: format!("activity {activity:?} while at {place:?}"),
                });
            }
        }
    }
}

fn location_mismatches(
    log: &[LogRecord],
    by_participant: &BTreeMap<&ParticipantId, Vec<&Lifecycle>>,
    config: &CheckConfig,
    flags: &mut Vec<QualityFlag>,
) {
    let mut places: BTreeMap<&ParticipantId, Vec<(Timestamp, &str, usize)>> = BTreeMap::new();
    for (i, r) in log.iter().enumerate() {
        if let LogRecord::Sensor(s) = r {
            if let SensorValue::Place(place) = &s.value {
                if place != UNKNOWN_PLACE {
                    places.entry(&s.participant).or_default().push((s.at, place.as_str(), i));
                }
            }
        }
    }
    for (p, cycles) in by_participant {
        let Some(readings) = places.get(p) else { continue };
        for c in cycles.iter().filter(|c| c.category == QCategory::WE) {
            let (Some(delivered), Some(stored), Some(answer), Some(idx)) =
                (c.delivered, c.stored, c.answer.as_deref(), c.index_of(EventKind::AnswerStored))
            else {
                continue;
            };
            let lo = readings.partition_point(|x| x.0 < delivered - config.location_slack);
            let near: Vec<_> = readings[lo..].iter().take_while(|x| x.0 <= stored + config.location_slack).collect();
            if near.is_empty() || near.iter().any(|(_, place, _)| config.compatibility.compatible(answer, place)) {
                continue;
            }
            flags.push(QualityFlag {
                participant: Some((*p).clone()),
                kind: FlagKind::LocationMismatch,
                evidence: alloc::vec![idx, near[0].2],
                at: stored,
                detail: format!("answered {answer:?} but location reads {:?}", near[0].1),
            });
        }
    }
}

fn sensor_gaps(log: &[LogRecord], timeline: &Timeline, config: &CheckConfig, flags: &mut Vec<QualityFlag>) {
    let first = log[0].at();
    let last = log[log.len() - 1].at();
    let mut seen: BTreeMap<(&ParticipantId, CollectionRef), BTreeMap<Timestamp, usize>> = BTreeMap::new();
    let mut any_record: BTreeMap<&ParticipantId, Vec<usize>> = BTreeMap::new();
    for (i, r) in log.iter().enumerate() {
        any_record.entry(r.participant()).or_default().push(i);
        if let LogRecord::Sensor(s) = r {
            seen.entry((&s.participant, s.collection)).or_default().entry(s.at).or_insert(i);
        }
    }
    let empty = BTreeMap::new();
    for (p, records) in &any_record {
        for occ_source in timeline
            .collections()
            .iter()
            .filter(|(r, s)| r.kind == CollectionKind::Sensor && !is_on_change(&s.label))
            .map(|(r, _)| *r)
        {
            let got = seen.get(&(*p, occ_source)).unwrap_or(&empty);
            let mut run: Vec<Timestamp> = Vec::new();
            let scheduled = timeline
                .occurrences(p)
                .filter(|o| o.source == occ_source && o.scheduled_at >= first && o.scheduled_at <= last)
                .map(|o| o.scheduled_at);
            for at in scheduled.chain(core::iter::once(Timestamp::from_millis(i64::MAX))) {
                if at != Timestamp::from_millis(i64::MAX) && !got.contains_key(&at) {
                    run.push(at);
                    continue;
                }
                if run.len() as u64 > config.sensor_gap {
                    let before = got.range(..run[0]).next_back().map(|(_, &i)| i);
                    let after = got.range(run[0]..).next().map(|(_, &i)| i);
                    let nearest = records[records.partition_point(|&i| log[i].at() < run[0]).min(records.len() - 1)];
                    let evidence: Vec<usize> = [before, after].into_iter().flatten().collect();
                    let label = &timeline.collection(&occ_source).expect("listed").label;
                    flags.push(QualityFlag {
                        participant: Some((*p).clone()),
                        kind: FlagKind::SensorGap,
                        evidence: if evidence.is_empty() { alloc::vec![nearest] } else { evidence },
                        at: run[0],
                        detail: format!("{label}: {} consecutive readings missing from {}", run.len(), run[0]),
                    });
                }
                run.clear();
            }
        }
    }
}
