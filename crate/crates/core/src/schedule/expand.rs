//! Recurrence expansion.
//!
//! The k-th instant of a rule is `dtstart + k * interval` frequency units,
//! measured from `dtstart` (not from the previous instant). Monthly and yearly
//! rules step by calendar months and clamp the day of month, so Jan 31 + 1
//! month is Feb 28 (or 29) and the following step lands on Mar 31 again.

use alloc::vec::Vec;

use crate::plan::{Frequency, RecurrenceRule};
use crate::time::{TimeDelta, Timestamp};

pub const DEFAULT_OCCURRENCE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExpandError {
    #[error("expansion needs {needed} occurrences, above the cap of {cap}")]
    Overflow { needed: u64, cap: u64 },
    #[error("rule interval and count must be at least 1")]
    InvalidRule,
    #[error("window start {start} is not before end {end}")]
    EmptyWindow { start: Timestamp, end: Timestamp },
}

/// The `k`-th instant of the rule, ignoring count and window.
pub fn nth_instant(rule: &RecurrenceRule, dtstart: Timestamp, k: u64) -> Option<Timestamp> {
    let steps = k.checked_mul(rule.interval as u64)?;
    match rule.frequency.fixed_millis() {
        Some(unit) => {
            let offset = i64::try_from(steps).ok()?.checked_mul(unit)?;
            dtstart.checked_add(TimeDelta::from_millis(offset))
        }
        None => {
            let months = match rule.frequency {
                Frequency::Monthly => steps,
                _ => steps.checked_mul(12)?,
            };
            dtstart.add_months_clamped(i64::try_from(months).ok()?)
        }
    }
}

/// `min(count, number of rule instants before dtend)` without materializing them.
pub fn occurrence_count(rule: &RecurrenceRule, dtstart: Timestamp, dtend: Timestamp) -> u64 {
    if dtstart >= dtend || rule.interval == 0 {
        return 0;
    }
    match rule.frequency.fixed_millis() {
        Some(unit) => {
            let step = unit as i128 * rule.interval as i128;
            let span = (dtend - dtstart).as_millis() as i128;
            let fit = (span + step - 1) / step;
            rule.count.min(fit.min(u64::MAX as i128) as u64)
        }
        None => {
            let mut k = 0;
            while k < rule.count {
                match nth_instant(rule, dtstart, k) {
                    Some(t) if t < dtend => k += 1,
                    _ => break,
                }
            }
            k
        }
    }
}

/// Expands with the default cap of ten million occurrences.
pub fn expand(rule: &RecurrenceRule, dtstart: Timestamp, dtend: Timestamp) -> Result<Vec<Timestamp>, ExpandError> {
    expand_capped(rule, dtstart, dtend, DEFAULT_OCCURRENCE_CAP)
}

pub fn expand_capped(
    rule: &RecurrenceRule,
    dtstart: Timestamp,
    dtend: Timestamp,
    cap: u64,
) -> Result<Vec<Timestamp>, ExpandError> {
    if rule.interval == 0 || rule.count == 0 {
        return Err(ExpandError::InvalidRule);
    }
    if dtstart >= dtend {
        return Err(ExpandError::EmptyWindow { start: dtstart, end: dtend });
    }
    let n = occurrence_count(rule, dtstart, dtend);
    if n > cap {
        return Err(ExpandError::Overflow { needed: n, cap });
    }
    let mut out = Vec::with_capacity(n as usize);
    match rule.frequency.fixed_millis() {
        Some(unit) => {
            let step = TimeDelta::from_millis(unit * rule.interval as i64);
            let mut t = dtstart;
            for _ in 0..n {
                out.push(t);
                t += step;
            }
        }
        None => {
            for k in 0..n {
                out.push(nth_instant(rule, dtstart, k).expect("counted instant exists"));
            }
        }
    }
    Ok(out)
}
