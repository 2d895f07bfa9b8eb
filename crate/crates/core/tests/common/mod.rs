#![allow(dead_code)]

use std::collections::BTreeMap;

use ilog_core::context::{LifeSequence, ParticipantId, ParticipantProfile};
use ilog_core::plan::*;
use ilog_core::schedule::{compile, Timeline};
use ilog_core::sim::{run_simulation, BehaviorModel, CellParams, Distribution, EventLog, GroundTruthSpec, SimConfig};
use ilog_core::time::{TimeDelta, Timestamp, UtcOnly};

pub fn day0() -> Timestamp {
    Timestamp::ymd_hms(2020, 11, 2, 0, 0, 0)
}

pub const PLACES: &[&str] = &["Home Apartment/room", "Restaurant/pub", "University Classroom/library"];
pub const ACTIVITIES: &[&str] = &["Studying", "Eating", "Driving", "Sleeping"];
pub const PEOPLE: &[&str] = &["Alone", "Friend(s)", "Classmate(s)"];

fn question(cid: u64, cat: QCategory, opts: &[&str], days: i64, every_min: u32) -> QuestionCollection {
    QuestionCollection {
        cid,
        dtstart: day0(),
        dtend: day0() + TimeDelta::from_days(days),
        status: true,
        rrule: RecurrenceRule::new(Frequency::Minute, every_min, (24 * 60 / every_min as i64 * days) as u64),
        question: Question {
            qid: cid,
            qcategory: cat,
            question_content: format!("q{cid}"),
            answer_options: opts.iter().map(|s| s.to_string()).collect(),
            qtype: QType::SingleChoice,
            answer_content: None,
        },
        extensions: vec![],
    }
}

fn sensor(sid: u64, name: &str, st: SensorType, freq: Frequency, days: i64) -> SensorCollection {
    SensorCollection {
        sid,
        dtstart: day0(),
        dtend: day0() + TimeDelta::from_days(days),
        rrule: RecurrenceRule::new(freq, 1, 1_000_000),
        sensor: Sensor { name: name.into(), description: String::new(), sensor_type: st },
        extensions: vec![],
    }
}

/// WE/WA/WO every 30 minutes, GPS each minute, screen on change.
pub fn plan(days: i64) -> ExperimentPlan {
    ExperimentPlan {
        user: "researcher".into(),
        calendars: vec![Calendar {
            calendar_id: 1,
            context_collections: vec![ContextCollection {
                id: 1,
                question_collections: vec![
                    question(1, QCategory::WE, PLACES, days, 30),
                    question(2, QCategory::WA, ACTIVITIES, days, 30),
                    question(3, QCategory::WO, PEOPLE, days, 30),
                ],
                sensor_collections: vec![
                    sensor(1, "GPS", SensorType::Location, Frequency::Minute, days),
                    sensor(2, "Screen Status", SensorType::Device, Frequency::Hour, days),
                ],
                extensions: vec![],
            }],
            extensions: vec![],
        }],
    }
}

pub fn profiles(n: usize) -> Vec<ParticipantProfile> {
    (0..n)
        .map(|i| {
            let (g, d) = if i % 2 == 0 { ("F", "BSc") } else { ("M", "MSc") };
            ParticipantProfile::new(format!("p{i:03}"), g, d, "Sociology", "UTC")
        })
        .collect()
}

pub struct World {
    pub timeline: Timeline,
    pub people: Vec<ParticipantProfile>,
    pub ground: BTreeMap<ParticipantId, LifeSequence>,
}

pub fn world(days: i64, n: usize, seed: u64) -> World {
    world_with(plan(days), days, n, seed)
}

pub fn world_with(plan: ExperimentPlan, days: i64, n: usize, seed: u64) -> World {
    let people = profiles(n);
    let timeline = compile(&plan, &people).unwrap();
    let spec = GroundTruthSpec::from_timeline(&timeline);
    let ground = people
        .iter()
        .map(|p| (p.id.clone(), spec.generate(&p.id, day0(), day0() + TimeDelta::from_days(days), seed)))
        .collect();
    World { timeline, people, ground }
}

pub fn fixed(p_answer: f64, p_correct: f64, seed: u64) -> BehaviorModel {
    BehaviorModel::uniform(
        CellParams { p_answer, reaction: Distribution::Fixed(60.0), completion: Distribution::Fixed(10.0), p_correct },
        seed,
    )
}

impl World {
    pub fn simulate(&self, model: &BehaviorModel, config: &SimConfig) -> EventLog {
        self.simulate_in(model, config, &UtcOnly)
    }

    pub fn simulate_in(&self, model: &BehaviorModel, config: &SimConfig, zones: &dyn ilog_core::time::ZoneDb) -> EventLog {
        run_simulation(&self.timeline, &self.people, &self.ground, model, config, zones).unwrap()
    }
}

/// Answers fast in the morning and an hour late otherwise, so the
/// 30-minute label is high exactly for Morning deliveries.
pub fn morning_only(seed: u64) -> BehaviorModel {
    use ilog_core::sim::CellSelector;
    use ilog_core::time::DayPeriod;
    let slow = CellParams { p_answer: 1.0, reaction: Distribution::Fixed(3600.0), completion: Distribution::Fixed(10.0), p_correct: 1.0 };
    let fast = CellParams { reaction: Distribution::Fixed(60.0), ..slow.clone() };
    BehaviorModel::uniform(slow, seed).with_cell(CellSelector::day_period(DayPeriod::Morning), fast)
}

pub fn features(w: &World, log: &EventLog) -> Vec<ilog_core::predictor::FeatureVector> {
    w.people
        .iter()
        .flat_map(|p| ilog_core::predictor::extract_features(log, w.ground.get(&p.id), p, &UtcOnly).unwrap())
        .collect()
}
