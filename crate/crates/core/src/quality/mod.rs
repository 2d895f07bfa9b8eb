//! Monitoring: participant ranking, compliance, data-quality flags and the
//! dashboard aggregates.

pub mod checks;
pub mod heatmap;
pub mod summary;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::context::ParticipantId;
use crate::sim::{lifecycles_lossy, LogRecord};
use crate::time::{TimeDelta, Timestamp};

pub use checks::{run_quality_checks, CheckConfig, FlagKind, LocationCompatibility, QualityFlag};
pub use heatmap::{compliance_heatmap, HeatCell, Heatmap};
pub use summary::{dashboard_summary, AuthorizationError, DashboardSummary, SummaryOptions};

/// Cut lines between verdicts, as fractions of excess over each threshold.
/// A participant whose worst metric exceeds its threshold by at most `lower`
/// is Good; by more than `upper`, Poor; in between, Medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumBand {
    pub lower: f64,
    pub upper: f64,
}

impl Default for MediumBand {
    fn default() -> Self {
        Self { lower: 0.0, upper: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityParameters {
    pub max_unanswered: u64,
    pub max_avg_completion_time: TimeDelta,
    pub max_avg_response_time: TimeDelta,
    #[serde(default)]
    pub medium_band: MediumBand,
}

impl Default for QualityParameters {
    fn default() -> Self {
        Self {
            max_unanswered: 100,
            max_avg_completion_time: TimeDelta::from_minutes(2),
            max_avg_response_time: TimeDelta::from_minutes(30),
            medium_band: MediumBand::default(),
        }
    }
}

impl QualityParameters {
    pub fn check(&self) -> Result<(), &'static str> {
        if self.max_unanswered == 0
            || self.max_avg_completion_time <= TimeDelta::ZERO
            || self.max_avg_response_time <= TimeDelta::ZERO
        {
            return Err("thresholds must be positive");
        }
        let MediumBand { lower, upper } = self.medium_band;
        if !(0.0 <= lower && lower < upper && upper <= 1.0) {
            return Err("medium band must satisfy 0 <= lower < upper <= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Good,
    Medium,
    Poor,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Good => "good",
            Verdict::Medium => "medium",
            Verdict::Poor => "poor",
        })
    }
}

/// What a participant has done so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub participant: ParticipantId,
    pub delivered: u64,
    pub answered: u64,
    /// Delivered questions that closed without an answer.
    pub unanswered: u64,
    pub avg_reaction: Option<TimeDelta>,
    pub avg_completion: Option<TimeDelta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRanking {
    pub participant: ParticipantId,
    pub verdict: Verdict,
    pub unanswered_count: u64,
    pub avg_reaction: Option<TimeDelta>,
    pub avg_completion: Option<TimeDelta>,
    pub as_of: Timestamp,
}

fn mean(xs: &[TimeDelta]) -> Option<TimeDelta> {
    if xs.is_empty() {
        return None;
    }
    let sum: i128 = xs.iter().map(|d| d.as_millis() as i128).sum();
    Some(TimeDelta::from_millis((sum / xs.len() as i128) as i64))
}

/// Per-participant metrics over records at or before `as_of`.
pub fn participant_metrics(log: &[LogRecord], as_of: Option<Timestamp>) -> Vec<ParticipantMetrics> {
    let cut = as_of.map_or(log.len(), |t| log.partition_point(|r| r.at() <= t));
    let mut acc: BTreeMap<ParticipantId, (u64, u64, u64, Vec<TimeDelta>, Vec<TimeDelta>)> = BTreeMap::new();
    for p in log[..cut].iter().map(LogRecord::participant) {
        if !acc.contains_key(p) {
            acc.insert(p.clone(), Default::default());
        }
    }
    for ((p, _), c) in lifecycles_lossy(&log[..cut]) {
        let Some(delivered) = c.delivered else { continue };
        let a = acc.get_mut(&p).expect("participant seen");
        a.0 += 1;
        if c.stored.is_some() {
            a.1 += 1;
        } else if c.missed.is_some() {
            a.2 += 1;
        }
        if let Some(started) = c.started {
            a.3.push(started - delivered);
            if let Some(stored) = c.stored {
                a.4.push(stored - started);
            }
        }
    }
    acc.into_iter()
        .map(|(participant, (delivered, answered, unanswered, reaction, completion))| ParticipantMetrics {
            participant,
            delivered,
            answered,
            unanswered,
            avg_reaction: mean(&reaction),
            avg_completion: mean(&completion),
        })
        .collect()
}

/// Largest relative excess of any metric over its threshold; `<= 0` when all are within.
fn worst_excess(m: &ParticipantMetrics, p: &QualityParameters) -> f64 {
    let ratio = |v: f64, limit: f64| v / limit - 1.0;
    let mut worst = ratio(m.unanswered as f64, p.max_unanswered as f64);
    if let Some(r) = m.avg_reaction {
        worst = worst.max(ratio(r.as_millis() as f64, p.max_avg_response_time.as_millis() as f64));
    }
    if let Some(c) = m.avg_completion {
        worst = worst.max(ratio(c.as_millis() as f64, p.max_avg_completion_time.as_millis() as f64));
    }
    worst
}

/// Good iff every metric is within its threshold (plus `lower`), Poor iff any
/// exceeds it by more than `upper`, Medium otherwise. Missing averages (no
/// answers yet) count as within bounds.
pub fn rank_participant(m: &ParticipantMetrics, params: &QualityParameters, as_of: Timestamp) -> ParticipantRanking {
    let excess = worst_excess(m, params);
    let verdict = if excess <= params.medium_band.lower {
        Verdict::Good
    } else if excess > params.medium_band.upper {
        Verdict::Poor
    } else {
        Verdict::Medium
    };
    ParticipantRanking {
        participant: m.participant.clone(),
        verdict,
        unanswered_count: m.unanswered,
        avg_reaction: m.avg_reaction,
        avg_completion: m.avg_completion,
        as_of,
    }
}

/// Ranks everyone in the log as of `as_of`.
pub fn rank_all(log: &[LogRecord], params: &QualityParameters, as_of: Timestamp) -> Vec<ParticipantRanking> {
    participant_metrics(log, Some(as_of)).iter().map(|m| rank_participant(m, params, as_of)).collect()
}
