//! Aggregates behind the six summary panels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{mean, QualityParameters};
use crate::context::ParticipantId;
use crate::schedule::{Actor, CollectionKind, CollectionRef, Timeline};
use crate::sim::catalog::is_on_change;
use crate::sim::{lifecycles_lossy, LogRecord};
use crate::time::{TimeDelta, Timestamp, MS_PER_DAY};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Lets participants see anonymous cohort averages next to their own.
    #[serde(default)]
    pub cohort_visible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum AuthorizationError {
    #[error("participant {viewer} may not view data of {subject}")]
    OtherParticipant { viewer: ParticipantId, subject: ParticipantId },
    #[error("the platform has no dashboard view")]
    NoView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LivePanel {
    pub participants: u64,
    /// Participants with any record in the 24 hours before `now`.
    pub live_last_24h: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressPanel {
    pub start: Timestamp,
    pub end: Timestamp,
    pub days_total: i64,
    pub days_covered: i64,
    pub days_left: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionDelivery {
    pub collection: CollectionRef,
    pub label: String,
    pub generated: u64,
    pub delivered: u64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryPanel {
    pub generated: u64,
    pub delivered: u64,
    pub rate: Option<f64>,
    pub per_collection: Vec<CollectionDelivery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerStats {
    pub delivered: u64,
    pub answered: u64,
    pub unanswered: u64,
    pub answer_rate: Option<f64>,
    pub avg_reaction: Option<TimeDelta>,
    pub avg_completion: Option<TimeDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerPanel {
    /// `None` for the whole experiment, the viewer's id otherwise.
    pub scope: Option<ParticipantId>,
    pub stats: AnswerStats,
    pub cohort: Option<AnswerStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRate {
    pub collection: CollectionRef,
    pub sensor: String,
    pub frequency: String,
    /// Scheduled readings so far; `None` for on-change sensors.
    pub expected: Option<u64>,
    pub collected: u64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardSummary {
    pub as_of: Timestamp,
    pub quality_parameters: QualityParameters,
    /// Researcher only.
    pub live: Option<LivePanel>,
    pub progress: ProgressPanel,
    pub delivery: DeliveryPanel,
    pub answers: AnswerPanel,
    pub sensors: Vec<SensorRate>,
}

impl DashboardSummary {
    /// Panels present in this view, `'A'..='F'`.
    pub fn panels(&self) -> Vec<char> {
        let mut v = alloc::vec!['A'];
        if self.live.is_some() {
            v.push('B');
        }
        v.extend(['C', 'D', 'E', 'F']);
        v
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn answer_stats<'a>(cycles: impl Iterator<Item = &'a crate::sim::Lifecycle>) -> AnswerStats {
    let (mut delivered, mut answered, mut unanswered) = (0, 0, 0);
    let (mut reaction, mut completion) = (Vec::new(), Vec::new());
    for c in cycles {
        let Some(d) = c.delivered else { continue };
        delivered += 1;
        if c.stored.is_some() {
            answered += 1;
        } else if c.missed.is_some() {
            unanswered += 1;
        }
        if let Some(s) = c.started {
            reaction.push(s - d);
            if let Some(st) = c.stored {
                completion.push(st - s);
            }
        }
    }
    AnswerStats {
        delivered,
        answered,
        unanswered,
        answer_rate: ratio(answered, delivered),
        avg_reaction: mean(&reaction),
        avg_completion: mean(&completion),
    }
}

/// Experiment window from the earliest collection start to the latest end.
fn progress(timeline: &Timeline, now: Timestamp) -> ProgressPanel {
    let specs = timeline.collections().values();
    let start = specs.clone().map(|s| s.dtstart).min().unwrap_or(now);
    let end = specs.map(|s| s.dtend).max().unwrap_or(now).max(start);
    let span = (end - start).as_millis();
    let days_total = (span + MS_PER_DAY - 1) / MS_PER_DAY;
    let days_covered = ((now - start).as_millis().max(0) / MS_PER_DAY).min(days_total);
    ProgressPanel { start, end, days_total, days_covered, days_left: days_total - days_covered }
}

/// Builds the summary as seen by `viewer`. Researchers see the whole
/// experiment, or `subject` alone when given; participants only themselves.
/// Only records at or before `now` count.
pub fn dashboard_summary(
    log: &[LogRecord],
    timeline: &Timeline,
    params: &QualityParameters,
    viewer: &Actor,
    subject: Option<&ParticipantId>,
    now: Timestamp,
    options: &SummaryOptions,
) -> Result<DashboardSummary, AuthorizationError> {
    let scope: Option<ParticipantId> = match (viewer, subject) {
        (Actor::Researcher, s) => s.cloned(),
        (Actor::Participant(me), Some(s)) if s != me => {
            return Err(AuthorizationError::OtherParticipant { viewer: me.clone(), subject: s.clone() })
        }
        (Actor::Participant(me), _) => Some(me.clone()),
        (Actor::Platform, _) => return Err(AuthorizationError::NoView),
    };
    let researcher = matches!(viewer, Actor::Researcher);
    let log = &log[..log.partition_point(|r| r.at() <= now)];
    let in_scope = |p: &ParticipantId| scope.as_ref().is_none_or(|s| s == p);
    let cycles = lifecycles_lossy(log);

    let live = researcher.then(|| {
        let everyone: BTreeSet<&ParticipantId> =
            timeline.participants().chain(log.iter().map(LogRecord::participant)).collect();
        let since = now - TimeDelta::from_days(1);
        let recent = log[log.partition_point(|r| r.at() < since)..]
            .iter()
            .map(LogRecord::participant)
            .collect::<BTreeSet<_>>();
        LivePanel { participants: everyone.len() as u64, live_last_24h: recent.len() as u64 }
    });

    let mut per: BTreeMap<CollectionRef, (u64, u64)> = BTreeMap::new();
    for ((p, occ), c) in &cycles {
        if !in_scope(p) || c.generated.is_none() {
            continue;
        }
        let e = per.entry(occ.collection).or_default();
        e.0 += 1;
        e.1 += c.delivered.is_some() as u64;
    }
    let (generated, delivered) = per.values().fold((0, 0), |a, v| (a.0 + v.0, a.1 + v.1));
    let delivery = DeliveryPanel {
        generated,
        delivered,
        rate: ratio(delivered, generated),
        per_collection: per
            .into_iter()
            .map(|(collection, (g, d))| CollectionDelivery {
                collection,
                label: timeline.collection(&collection).map(|s| s.label.clone()).unwrap_or_default(),
                generated: g,
                delivered: d,
                rate: ratio(d, g),
            })
            .collect(),
    };

    let stats = answer_stats(cycles.iter().filter(|((p, _), _)| in_scope(p)).map(|(_, c)| c));
    let cohort = (!researcher && options.cohort_visible).then(|| answer_stats(cycles.values()));
    let answers = AnswerPanel { scope: scope.clone(), stats, cohort };

    let mut collected: BTreeMap<CollectionRef, u64> = BTreeMap::new();
    for r in log {
        if let LogRecord::Sensor(s) = r {
            if in_scope(&s.participant) {
                *collected.entry(s.collection).or_default() += 1;
            }
        }
    }
    let people: Vec<&ParticipantId> = timeline.participants().filter(|p| in_scope(p)).collect();
    let sensors = timeline
        .collections()
        .iter()
        .filter(|(r, _)| r.kind == CollectionKind::Sensor)
        .map(|(r, spec)| {
            let got = collected.get(r).copied().unwrap_or(0);
            let expected = (!is_on_change(&spec.label)).then(|| {
                people
                    .iter()
                    .map(|p| timeline.occurrences(p).filter(|o| o.source == *r && o.scheduled_at <= now).count() as u64)
                    .sum::<u64>()
            });
            SensorRate {
                collection: *r,
                sensor: spec.label.clone(),
                frequency: alloc::format!("{}", spec.rrule),
                expected,
                collected: got,
                rate: expected.and_then(|e| ratio(got, e)),
            }
        })
        .collect();

    Ok(DashboardSummary {
        as_of: now,
        quality_parameters: *params,
        live,
        progress: progress(timeline, now),
        delivery,
        answers,
        sensors,
    })
}
