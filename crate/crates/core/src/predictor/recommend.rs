//! When to ask: per-participant ranking of (weekday, day period) cells and
//! the platform revisions that follow from it.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{Encoder, FeatureVector, TrainedModel};
use crate::context::ParticipantId;
use crate::schedule::{Actor, Change, CollectionKind, Revision, RevisionError, RevisionPolicy, RevisionTarget, Timeline};
use crate::time::{DayPeriod, TimeDelta, TimeError, Timestamp, ZoneDb, MS_PER_HOUR};

/// Below this spread between the best and worst cell there is no preference.
pub const NO_PREFERENCE_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub weekday: u8,
    pub day_period: DayPeriod,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecommendation {
    pub participant: ParticipantId,
    /// All 28 cells, best first; ties in (weekday, period) order.
    pub ranked: Vec<CellScore>,
    pub no_preference: bool,
}

impl WindowRecommendation {
    pub fn score(&self, weekday: u8, period: DayPeriod) -> Option<f64> {
        self.ranked.iter().find(|c| c.weekday == weekday && c.day_period == period).map(|c| c.probability)
    }

    /// Best period of one weekday.
    pub fn best_on(&self, weekday: u8) -> Option<CellScore> {
        self.ranked.iter().find(|c| c.weekday == weekday).copied()
    }
}

/// Partial dependence of the predicted high-quality probability on each cell,
/// averaged over the participant's own rows.
pub fn recommend_windows(
    model: &TrainedModel,
    encoder: &Encoder,
    participant: &ParticipantId,
    rows: &[FeatureVector],
) -> WindowRecommendation {
    let mine: Vec<&FeatureVector> = rows.iter().filter(|r| &r.participant == participant).collect();
    let mut ranked = Vec::with_capacity(28);
    for weekday in 1..=7u8 {
        for period in DayPeriod::ALL {
            let probability = if mine.is_empty() {
                0.5
            } else {
                mine.iter()
                    .map(|r| {
                        let row = FeatureVector { weekday, day_period: period, ..(*r).clone() };
                        model.predict_proba(&encoder.encode(&row))
                    })
                    .sum::<f64>()
                    / mine.len() as f64
            };
            ranked.push(CellScore { weekday, day_period: period, probability });
        }
    }
    ranked.sort_by(|a, b| {
        b.probability
            .partial_cmp(&a.probability)
            .unwrap_or(Ordering::Equal)
            .then((a.weekday, a.day_period).cmp(&(b.weekday, b.day_period)))
    });
    let hi = ranked.first().map_or(0.0, |c| c.probability);
    let lo = ranked.last().map_or(0.0, |c| c.probability);
    WindowRecommendation { participant: participant.clone(), ranked, no_preference: hi - lo < NO_PREFERENCE_SPREAD }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalOutcome {
    pub revision: Revision,
    pub from: (u8, DayPeriod),
    pub to: (u8, DayPeriod),
    /// Audit sequence number when applied.
    pub applied: Option<u64>,
    pub rejected: Option<RevisionError>,
}

/// Proposes a platform shift for every question due in `(now, now + horizon]`
/// whose cell trails the best period of its weekday by more than the
/// indifference spread, moving it to the start of that period. Each proposal
/// is applied through the revision policy; rejections are returned, not raised.
pub fn apply_recommendation(
    timeline: &mut Timeline,
    rec: &WindowRecommendation,
    policy: &RevisionPolicy,
    zones: &dyn ZoneDb,
    timezone: &str,
    now: Timestamp,
    horizon: TimeDelta,
) -> Result<Vec<ProposalOutcome>, TimeError> {
    if rec.no_preference {
        return Ok(Vec::new());
    }
    let due: Vec<_> = timeline
        .occurrences(&rec.participant)
        .filter(|o| o.source.kind == CollectionKind::Question && o.scheduled_at > now && o.scheduled_at <= now + horizon)
        .map(|o| (o.reference(), o.scheduled_at))
        .collect();
    let mut out = Vec::new();
    for (occ, at) in due {
        let local = zones.to_local(timezone, at)?;
        let weekday = local.date().weekday();
        let period = DayPeriod::of(local);
        let (Some(here), Some(best)) = (rec.score(weekday, period), rec.best_on(weekday)) else { continue };
        if best.probability - here <= NO_PREFERENCE_SPREAD {
            continue;
        }
        let target = local.date().start() + TimeDelta::from_millis(best.day_period.start_hour() as i64 * MS_PER_HOUR);
        let revision = Revision {
            actor: Actor::Platform,
            participant: Some(rec.participant.clone()),
            target: RevisionTarget::Occurrence(occ),
            change: Change::Shift(target - local),
            issued_at: now,
        };
        let (applied, rejected) = match timeline.apply_revision(revision.clone(), policy) {
            Ok(record) => (Some(record.seq), None),
            Err(e) => (None, Some(e)),
        };
        out.push(ProposalOutcome { revision, from: (weekday, period), to: (weekday, best.day_period), applied, rejected });
    }
    Ok(out)
}
