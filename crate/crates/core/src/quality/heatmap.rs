use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::ParticipantId;
use crate::sim::{lifecycles_lossy, LogRecord};
use crate::time::Date;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub delivered: u64,
    pub answered: u64,
    pub rate: f64,
}

/// Answer rate per participant and delivery day. `cells[p][d]` is `None`
/// when nothing was delivered to participant `p` on day `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub participants: Vec<ParticipantId>,
    pub days: Vec<Date>,
    pub cells: Vec<Vec<Option<HeatCell>>>,
    /// Days in the window on which nobody recorded anything at all.
    pub flagged_days: Vec<Date>,
}

impl Heatmap {
    pub fn cell(&self, participant: &ParticipantId, day: Date) -> Option<HeatCell> {
        let p = self.participants.iter().position(|x| x == participant)?;
        let d = self.days.iter().position(|x| *x == day)?;
        self.cells[p][d]
    }
}

/// Heatmap over the inclusive day range `[from, to]`, by UTC delivery date.
pub fn compliance_heatmap(log: &[LogRecord], from: Date, to: Date) -> Heatmap {
    let mut days = Vec::new();
    let mut d = from;
    while d <= to {
        days.push(d);
        d = d.succ();
    }
    let participants: Vec<ParticipantId> =
        log.iter().map(LogRecord::participant).collect::<BTreeSet<_>>().into_iter().cloned().collect();
    let mut counts: BTreeMap<(ParticipantId, Date), (u64, u64)> = BTreeMap::new();
    for ((p, _), c) in lifecycles_lossy(log) {
        let Some(delivered) = c.delivered else { continue };
        let day = delivered.date();
        if day < from || day > to {
            continue;
        }
        let e = counts.entry((p, day)).or_default();
        e.0 += 1;
        e.1 += c.stored.is_some() as u64;
    }
    let cells = participants
        .iter()
        .map(|p| {
            days.iter()
                .map(|d| {
                    counts.get(&(p.clone(), *d)).map(|&(delivered, answered)| HeatCell {
                        delivered,
                        answered,
                        rate: answered as f64 / delivered as f64,
                    })
                })
                .collect()
        })
        .collect();
    let active: BTreeSet<Date> = log.iter().map(|r| r.at().date()).collect();
    let flagged_days = days.iter().copied().filter(|d| !active.contains(d)).collect();
    Heatmap { participants, days, cells, flagged_days }
}
