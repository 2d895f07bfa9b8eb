use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::behavior::{BehaviorModel, Situation};
use super::catalog::{catalog_entry, is_on_change};
use super::ground::{truth_label, ALONE};
use super::{record_order, EventKind, EventLog, LogRecord, QAEvent, SensorReading, SensorValue};
use crate::context::{LifeSequence, ParticipantId, ParticipantProfile, SituationalContext};
use crate::plan::{DiaryOrTask, QCategory, SensorType};
use crate::schedule::{CollectionKind, CollectionRef, CollectionSpec, Occurrence, Timeline};
use crate::stable_hash;
use crate::time::{DayPeriod, TimeDelta, TimeError, ZoneDb};

/// Place class reported when the ground truth has no context at that instant.
pub const UNKNOWN_PLACE: &str = "Unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Delivered = Generated + this latency.
    pub delivery_latency: TimeDelta,
    /// Chance that a generated question never reaches the device.
    pub delivery_failure_rate: f64,
    /// Emit sensor readings as well as QA events.
    pub sensors: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { delivery_latency: TimeDelta::from_secs(5), delivery_failure_rate: 0.0, sensors: true }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("ground truth for {participant} has no {category} labels but the plan asks {category} questions")]
    Coverage { participant: ParticipantId, category: QCategory },
    #[error("participant {0} is not in the timeline")]
    UnknownParticipant(ParticipantId),
    #[error("invalid behavior model: {0}")]
    Model(&'static str),
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Zone(#[from] TimeError),
}

/// Runs every participant through their timeline. The result is sorted by
/// [`record_order`] and depends only on the inputs and `model.seed`.
pub fn run_simulation(
    timeline: &Timeline,
    profiles: &[ParticipantProfile],
    ground: &BTreeMap<ParticipantId, LifeSequence>,
    model: &BehaviorModel,
    config: &SimConfig,
    zones: &dyn ZoneDb,
) -> Result<EventLog, SimError> {
    model.check().map_err(SimError::Model)?;
    if !(0.0..=1.0).contains(&config.delivery_failure_rate) || config.delivery_latency.is_negative() {
        return Err(SimError::Config("failure rate must lie in [0, 1] and latency must be non-negative"));
    }
    let empty = LifeSequence::new(ParticipantId::new(""), "");
    let mut log = Vec::new();
    for profile in profiles {
        if !timeline.participants().any(|p| p == &profile.id) {
            return Err(SimError::UnknownParticipant(profile.id.clone()));
        }
        let truth = ground.get(&profile.id).unwrap_or(&empty);
        check_coverage(timeline, &profile.id, truth)?;
        let mut sim = Participant {
            timeline,
            profile,
            truth,
            model,
            config,
            zones,
            qa_rng: ChaCha8Rng::seed_from_u64(stable_hash(&[b"qa", &model.seed.to_le_bytes(), profile.id.as_str().as_bytes()])),
            sensor_rng: ChaCha8Rng::seed_from_u64(stable_hash(&[
                b"sensor",
                &model.seed.to_le_bytes(),
                profile.id.as_str().as_bytes(),
            ])),
            out: &mut log,
        };
        sim.run()?;
    }
    log.sort_by(record_order);
    Ok(log)
}

fn check_coverage(timeline: &Timeline, participant: &ParticipantId, truth: &LifeSequence) -> Result<(), SimError> {
    let asked: alloc::collections::BTreeSet<QCategory> = timeline
        .occurrences(participant)
        .filter_map(|o| timeline.collection(&o.source)?.category)
        .collect();
    for category in asked {
        if !truth.contexts().iter().any(|c| truth_label(c, category).is_some()) {
            return Err(SimError::Coverage { participant: participant.clone(), category });
        }
    }
    Ok(())
}

struct Participant<'a> {
    timeline: &'a Timeline,
    profile: &'a ParticipantProfile,
    truth: &'a LifeSequence,
    model: &'a BehaviorModel,
    config: &'a SimConfig,
    zones: &'a dyn ZoneDb,
    qa_rng: ChaCha8Rng,
    sensor_rng: ChaCha8Rng,
    out: &'a mut EventLog,
}

impl Participant<'_> {
    fn run(&mut self) -> Result<(), SimError> {
        let pid = &self.profile.id;
        for occ in self.timeline.occurrences(pid) {
            let spec = self.timeline.collection(&occ.source).expect("timeline collection");
            match occ.source.kind {
                CollectionKind::Question => self.question(occ, spec)?,
                CollectionKind::Sensor if self.config.sensors && !is_on_change(&spec.label) => self.reading(occ, spec),
                CollectionKind::Sensor => {}
            }
        }
        if self.config.sensors {
            self.on_change_sensors();
        }
        Ok(())
    }

    fn qa(&mut self, occ: &Occurrence, spec: &CollectionSpec, kind: EventKind, at: crate::time::Timestamp, payload: Option<String>) {
        self.out.push(LogRecord::Qa(QAEvent {
            participant: self.profile.id.clone(),
            occurrence: occ.reference(),
            kind,
            at,
            payload,
            diary_or_task: spec.protocol.unwrap_or(DiaryOrTask::TimeDiary),
            category: spec.category.unwrap_or(QCategory::WA),
        }));
    }

    fn question(&mut self, occ: &Occurrence, spec: &CollectionSpec) -> Result<(), SimError> {
        let generated = occ.scheduled_at;
        self.qa(occ, spec, EventKind::QuestionGenerated, generated, None);
        if self.config.delivery_failure_rate > 0.0 && self.qa_rng.random_bool(self.config.delivery_failure_rate) {
            self.qa(occ, spec, EventKind::Missed, occ.window_end.max(generated), None);
            return Ok(());
        }
        let delivered = generated + self.config.delivery_latency;
        self.qa(occ, spec, EventKind::QuestionDelivered, delivered, None);

        let ctx = self.truth.context_at(delivered);
        let local = self.zones.to_local(&self.profile.timezone, delivered)?;
        let social = ctx.map(|c| c.wo.first().map(String::as_str).unwrap_or(ALONE));
        let situation = Situation {
            spatial: ctx.and_then(|c| c.we.as_deref()),
            social,
            weekday: local.date().weekday(),
            day_period: DayPeriod::of(local),
        };
        let params = self.model.select(&situation).clone();
        // draw everything up front so the stream does not depend on outcomes
        let answers = self.qa_rng.random_bool(params.p_answer);
        let reaction = params.reaction.sample(&mut self.qa_rng);
        let completion = params.completion.sample(&mut self.qa_rng);
        let correct = self.qa_rng.random_bool(params.p_correct);
        let answer = self.answer(ctx, spec, correct);

        let started = delivered + reaction;
        let expires = occ.window_end.max(delivered);
        if answers && started < expires {
            self.qa(occ, spec, EventKind::AnswerStarted, started, None);
            self.qa(occ, spec, EventKind::AnswerStored, started + completion, Some(answer));
        } else {
            self.qa(occ, spec, EventKind::Missed, expires, None);
        }
        Ok(())
    }

    /// The ground-truth label when `correct`, otherwise a uniformly drawn wrong option.
    fn answer(&mut self, ctx: Option<&SituationalContext>, spec: &CollectionSpec, correct: bool) -> String {
        let truth = ctx.and_then(|c| truth_label(c, spec.category.unwrap_or(QCategory::WA)));
        let wrong: Vec<&String> =
            spec.options.iter().filter(|o| truth.is_none_or(|t| !o.eq_ignore_ascii_case(t))).collect();
        let pick = wrong.choose(&mut self.qa_rng).map(|s| (*s).clone());
        match (truth, correct) {
            (Some(t), true) => String::from(t),
            (_, _) => pick.or_else(|| truth.map(String::from)).unwrap_or_else(|| String::from("Other")),
        }
    }

    fn reading(&mut self, occ: &Occurrence, spec: &CollectionSpec) {
        let ctx = self.truth.context_at(occ.scheduled_at);
        let rng = &mut self.sensor_rng;
        let name = spec.label.as_str();
        let sensor_type = spec.sensor_type.or_else(|| catalog_entry(name).map(|e| e.sensor_type));
        let value = match sensor_type {
            Some(SensorType::Location) if name.to_ascii_lowercase().contains("wifi") => {
                SensorValue::Scalar(rng.random_range(1..12) as f64)
            }
            Some(SensorType::Location) => {
                SensorValue::Place(String::from(ctx.and_then(|c| c.we.as_deref()).unwrap_or(UNKNOWN_PLACE)))
            }
            Some(SensorType::Social) => SensorValue::Scalar(ctx.map_or(0, |c| c.wo.len()) as f64),
            Some(SensorType::Motion) if name.to_ascii_lowercase().contains("label") => {
                let moving = ctx.is_some_and(|c| c.wa.iter().any(|a| a.eq_ignore_ascii_case("Driving")));
                SensorValue::Label(String::from(if moving { "in_vehicle" } else { "still" }))
            }
            Some(SensorType::Motion | SensorType::Inertial) => SensorValue::Triple([
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                9.81 + rng.random_range(-0.5..0.5),
            ]),
            Some(SensorType::Ambient) => SensorValue::Scalar(rng.random_range(0.0..1000.0)),
            Some(SensorType::Device) => SensorValue::Scalar(rng.random_range(0.0..100.0)),
            Some(SensorType::Software) => SensorValue::Label(String::from("foreground")),
            Some(SensorType::QuestionAnswering) | None => SensorValue::Label(String::from("tick")),
        };
        self.out.push(LogRecord::Sensor(SensorReading {
            participant: self.profile.id.clone(),
            sensor: spec.label.clone(),
            collection: occ.source,
            at: occ.scheduled_at,
            value,
            cadence_source: Some(occ.reference()),
        }));
    }

    /// On-change sensors fire at every context transition inside their window.
    fn on_change_sensors(&mut self) {
        let collections: Vec<(CollectionRef, &CollectionSpec)> = self
            .timeline
            .collections()
            .iter()
            .filter(|(r, s)| r.kind == CollectionKind::Sensor && is_on_change(&s.label))
            .map(|(r, s)| (*r, s))
            .collect();
        for (source, spec) in collections {
            let mut state = false;
            let mut last_place: Option<&str> = None;
            for ctx in self.truth.contexts() {
                if ctx.start < spec.dtstart || ctx.start >= spec.dtend {
                    continue;
                }
                let place = ctx.we.as_deref();
                let value = if spec.label.to_ascii_lowercase().contains("wifi") {
                    if place == last_place {
                        continue;
                    }
                    last_place = place;
                    SensorValue::Label(place.map_or(String::from("none"), |p| format!("wifi:{p}")))
                } else {
                    state = !state;
                    SensorValue::Flag(state)
                };
                self.out.push(LogRecord::Sensor(SensorReading {
                    participant: self.profile.id.clone(),
                    sensor: spec.label.clone(),
                    collection: source,
                    at: ctx.start,
                    value,
                    cadence_source: None,
                }));
            }
        }
    }
}
