//! Synthetic ground-truth life sequences.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{LifeSequence, ParticipantId, SituationalContext, IMPLAUSIBLE_PAIRS};
use crate::plan::QCategory;
use crate::schedule::Timeline;
use crate::stable_hash;
use crate::time::{TimeDelta, Timestamp};

/// Social label of a context with nobody else present.
pub const ALONE: &str = "Alone";

/// The label a correct answer to a `category` question gives in `ctx`.
pub fn truth_label(ctx: &SituationalContext, category: QCategory) -> Option<&str> {
    match category {
        QCategory::WE => ctx.we.as_deref(),
        QCategory::WA => ctx.wa.first().map(String::as_str),
        QCategory::WI => ctx.wi.as_deref(),
        QCategory::WO => Some(ctx.wo.first().map(String::as_str).unwrap_or(ALONE)),
        QCategory::WU => ctx.wu.first().map(String::as_str),
    }
}

/// Vocabularies and timing for generated life sequences. Labels are drawn
/// uniformly and independently per context, except that activity and place
/// pairs listed in [`IMPLAUSIBLE_PAIRS`] are never generated together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub places: Vec<String>,
    pub activities: Vec<String>,
    pub moods: Vec<String>,
    pub social: Vec<String>,
    pub min_duration: TimeDelta,
    pub max_duration: TimeDelta,
    /// Chance of an unlabelled gap after each context.
    pub gap_probability: f64,
    pub max_gap: TimeDelta,
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        Self {
            places: Vec::new(),
            activities: Vec::new(),
            moods: Vec::new(),
            social: Vec::new(),
            min_duration: TimeDelta::from_minutes(30),
            max_duration: TimeDelta::from_minutes(120),
            gap_probability: 0.0,
            max_gap: TimeDelta::from_minutes(30),
        }
    }
}

impl GroundTruthSpec {
    /// Uses the answer options of the timeline's question collections as vocabularies.
    pub fn from_timeline(timeline: &Timeline) -> Self {
        let mut vocab: [BTreeSet<String>; 4] = Default::default();
        for spec in timeline.collections().values() {
            let slot = match spec.category {
                Some(QCategory::WE) => 0,
                Some(QCategory::WA) => 1,
                Some(QCategory::WI) => 2,
                Some(QCategory::WO) => 3,
                _ => continue,
            };
            vocab[slot].extend(spec.options.iter().cloned());
        }
        let [places, activities, moods, social] = vocab.map(|s| s.into_iter().collect());
        Self { places, activities, moods, social, ..Self::default() }
    }

    pub fn check(&self) -> Result<(), &'static str> {
        if self.min_duration <= TimeDelta::ZERO || self.max_duration < self.min_duration {
            return Err("context durations must satisfy 0 < min <= max");
        }
        if !(0.0..=1.0).contains(&self.gap_probability) || self.max_gap.is_negative() {
            return Err("gap probability must lie in [0, 1] and max gap must be non-negative");
        }
        Ok(())
    }

    fn implausible(activity: &str, place: &str) -> bool {
        IMPLAUSIBLE_PAIRS
            .iter()
            .any(|(a, p)| a.eq_ignore_ascii_case(activity) && p.eq_ignore_ascii_case(place))
    }

    /// A contiguous (up to gaps) sequence covering `[start, end)`.
    pub fn generate(&self, person: &ParticipantId, start: Timestamp, end: Timestamp, seed: u64) -> LifeSequence {
        self.check().expect("valid ground-truth spec");
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[b"ground", &seed.to_le_bytes(), person.as_str().as_bytes()]));
        let mut seq = LifeSequence::new(person.clone(), "simulated");
        let span = (self.max_duration - self.min_duration).as_millis();
        let mut t = start;
        let mut n = 0u64;
        while t < end {
            let len = self.min_duration + TimeDelta::from_millis(rng.random_range(0..=span));
            let stop = (t + len).min(end);
            let place = self.places.choose(&mut rng);
            let mut activity = self.activities.choose(&mut rng);
            if let (Some(a), Some(p)) = (activity, place) {
                if Self::implausible(a, p) {
                    let ok: Vec<&String> = self.activities.iter().filter(|a| !Self::implausible(a, p)).collect();
                    activity = ok.choose(&mut rng).copied();
                }
            }
            let mut ctx = SituationalContext::new(format!("{person}-{n}"), t, stop).expect("positive duration");
            if let Some(p) = place {
                ctx = ctx.at(p.clone());
            }
            ctx = ctx.doing(activity.cloned().unwrap_or_else(|| String::from("Unspecified")));
            if let Some(m) = self.moods.choose(&mut rng) {
                ctx = ctx.feeling(m.clone());
            }
            if let Some(w) = self.social.choose(&mut rng) {
                if !w.eq_ignore_ascii_case(ALONE) {
                    ctx = ctx.with(w.clone());
                }
            }
            seq = seq.append_context(ctx.close().expect("has an activity")).expect("generated in order");
            n += 1;
            t = stop;
            if self.gap_probability > 0.0 && rng.random_bool(self.gap_probability) {
                t += TimeDelta::from_millis(rng.random_range(0..=self.max_gap.as_millis()));
            }
        }
        seq
    }
}
