//! iLogCal experiment plans.
//!
//! A plan groups calendars; a calendar groups context collections; a context
//! collection holds question collections and sensor collections, each carrying
//! its own time window and recurrence rule. The concrete syntax is iCalendar
//! content lines (see [`document`]).

pub mod document;
pub mod ical;
pub mod validate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

pub use document::{check_document, parse_plan, serialize_plan, CheckedDocument};
pub use validate::{validate_plan, Diagnostic, DiagnosticCode, Severity};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{path}: {reason}")]
    Validation { path: String, reason: String },
    #[error("{path}: duplicate id {id}")]
    DuplicateId { path: String, id: u64 },
}

/// An unrecognized property kept verbatim so newer documents survive a round trip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub user: String,
    pub calendars: Vec<Calendar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub calendar_id: u64,
    pub context_collections: Vec<ContextCollection>,
    #[serde(default)]
    pub extensions: Vec<Extension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextCollection {
    pub id: u64,
    pub question_collections: Vec<QuestionCollection>,
    pub sensor_collections: Vec<SensorCollection>,
    #[serde(default)]
    pub extensions: Vec<Extension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionCollection {
    pub cid: u64,
    pub dtstart: Timestamp,
    pub dtend: Timestamp,
    /// `true` when the participant accepted the collection.
    pub status: bool,
    pub rrule: RecurrenceRule,
    pub question: Question,
    #[serde(default)]
    pub extensions: Vec<Extension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub qid: u64,
    pub qcategory: QCategory,
    pub question_content: String,
    pub answer_options: Vec<String>,
    pub qtype: QType,
    pub answer_content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorCollection {
    pub sid: u64,
    pub dtstart: Timestamp,
    pub dtend: Timestamp,
    pub rrule: RecurrenceRule,
    pub sensor: Sensor,
    #[serde(default)]
    pub extensions: Vec<Extension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sensor {
    pub name: String,
    pub description: String,
    pub sensor_type: SensorType,
}

/// Which part of the situational context a question asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QCategory {
    WE,
    WA,
    WI,
    WO,
    WU,
}

impl QCategory {
    pub const ALL: [QCategory; 5] = [QCategory::WE, QCategory::WA, QCategory::WI, QCategory::WO, QCategory::WU];

    pub fn as_str(self) -> &'static str {
        match self {
            QCategory::WE => "WE",
            QCategory::WA => "WA",
            QCategory::WI => "WI",
            QCategory::WO => "WO",
            QCategory::WU => "WU",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QType {
    Dichotomous,
    MultipleChoice,
    SingleChoice,
    FreeText,
}

impl QType {
    pub const ALL: [QType; 4] = [QType::Dichotomous, QType::MultipleChoice, QType::SingleChoice, QType::FreeText];

    pub fn as_str(self) -> &'static str {
        match self {
            QType::Dichotomous => "DICHOTOMOUS",
            QType::MultipleChoice => "MULTIPLE-CHOICE",
            QType::SingleChoice => "SINGLE-CHOICE",
            QType::FreeText => "FREE-TEXT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorType {
    Social,
    Motion,
    Location,
    Inertial,
    Device,
    Ambient,
    Software,
    QuestionAnswering,
}

impl SensorType {
    pub const ALL: [SensorType; 8] = [
        SensorType::Social,
        SensorType::Motion,
        SensorType::Location,
        SensorType::Inertial,
        SensorType::Device,
        SensorType::Ambient,
        SensorType::Software,
        SensorType::QuestionAnswering,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorType::Social => "SOCIAL",
            SensorType::Motion => "MOTION",
            SensorType::Location => "LOCATION",
            SensorType::Inertial => "INERTIAL",
            SensorType::Device => "DEVICE",
            SensorType::Ambient => "AMBIENT",
            SensorType::Software => "SOFTWARE",
            SensorType::QuestionAnswering => "QUESTION-ANSWERING",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Frequency {
    Millisecond,
    Second,
    Minute,
    Hour,
    Daily,
    Weekly,
    Monthly,
    Yearly,
}

impl Frequency {
    pub const ALL: [Frequency; 8] = [
        Frequency::Millisecond,
        Frequency::Second,
        Frequency::Minute,
        Frequency::Hour,
        Frequency::Daily,
        Frequency::Weekly,
        Frequency::Monthly,
        Frequency::Yearly,
    ];

    /// Canonical RRULE token.
    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Millisecond => "X-MILLISECOND",
            Frequency::Second => "X-SECOND",
            Frequency::Minute => "X-MINUTE",
            Frequency::Hour => "X-HOUR",
            Frequency::Daily => "DAILY",
            Frequency::Weekly => "WEEKLY",
            Frequency::Monthly => "MONTHLY",
            Frequency::Yearly => "YEARLY",
        }
    }

    /// Fixed length of one unit, `None` for calendar-relative units.
    pub fn fixed_millis(self) -> Option<i64> {
        use crate::time::*;
        match self {
            Frequency::Millisecond => Some(1),
            Frequency::Second => Some(MS_PER_SECOND),
            Frequency::Minute => Some(MS_PER_MINUTE),
            Frequency::Hour => Some(MS_PER_HOUR),
            Frequency::Daily => Some(MS_PER_DAY),
            Frequency::Weekly => Some(7 * MS_PER_DAY),
            Frequency::Monthly | Frequency::Yearly => None,
        }
    }

    pub fn is_sub_daily(self) -> bool {
        self < Frequency::Daily
    }
}

impl FromStr for Frequency {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let upper = s.to_ascii_uppercase();
        Ok(match upper.as_str() {
            "X-MILLISECOND" | "X-MILLISECONDLY" => Frequency::Millisecond,
            "X-SECOND" | "SECONDLY" => Frequency::Second,
            "X-MINUTE" | "MINUTELY" => Frequency::Minute,
            "X-HOUR" | "HOURLY" => Frequency::Hour,
            "DAILY" => Frequency::Daily,
            "WEEKLY" => Frequency::Weekly,
            "MONTHLY" => Frequency::Monthly,
            "YEARLY" => Frequency::Yearly,
            _ => return Err(()),
        })
    }
}

macro_rules! token_from_str {
    ($ty:ty) => {
        impl FromStr for $ty {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                <$ty>::ALL.into_iter().find(|v| v.as_str().eq_ignore_ascii_case(s)).ok_or(())
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_from_str!(QCategory);
token_from_str!(QType);
token_from_str!(SensorType);

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(frequency, interval, count)`: fire every `interval` frequency units, `count` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecurrenceRule {
    pub frequency: Frequency,
    pub interval: u32,
    pub count: u64,
}

impl RecurrenceRule {
    pub fn new(frequency: Frequency, interval: u32, count: u64) -> Self {
        Self { frequency, interval, count }
    }

    /// Parses `FREQ=...;INTERVAL=...;COUNT=...`. INTERVAL defaults to 1; COUNT is required.
    pub fn parse(value: &str) -> Result<Self, String> {
        let mut frequency = None;
        let mut interval = None;
        let mut count = None;
        for part in value.split(';').filter(|p| !p.is_empty()) {
            let (key, val) = part.split_once('=').ok_or_else(|| alloc::format!("malformed rule part {part:?}"))?;
            let key = key.to_ascii_uppercase();
            let slot_taken = match key.as_str() {
                "FREQ" => frequency.is_some(),
                "INTERVAL" => interval.is_some(),
                "COUNT" => count.is_some(),
                _ => return Err(alloc::format!("unsupported rule part {key}")),
            };
            if slot_taken {
                return Err(alloc::format!("rule part {key} repeated"));
            }
            match key.as_str() {
                "FREQ" => {
                    frequency = Some(val.parse::<Frequency>().map_err(|_| alloc::format!("unknown frequency {val:?}"))?)
                }
                "INTERVAL" => interval = Some(parse_positive(val, "INTERVAL")? as u32),
                _ => count = Some(parse_positive(val, "COUNT")?),
            }
        }
        Ok(Self {
            frequency: frequency.ok_or("rule has no FREQ")?,
            interval: interval.unwrap_or(1),
            count: count.ok_or("rule has no COUNT")?,
        })
    }
}

fn parse_positive(val: &str, what: &str) -> Result<u64, String> {
    match val.parse::<u64>() {
        Ok(0) => Err(alloc::format!("{what} must be at least 1")),
        Ok(n) if what == "INTERVAL" && n > u32::MAX as u64 => Err(alloc::format!("{what} too large")),
        Ok(n) => Ok(n),
        Err(_) => Err(alloc::format!("{what} value {val:?} is not a positive integer")),
    }
}

impl fmt::Display for RecurrenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FREQ={};INTERVAL={};COUNT={}", self.frequency, self.interval, self.count)
    }
}

/// QA protocol a question belongs to: context time diaries or process tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiaryOrTask {
    TimeDiary,
    Task,
}

/// Extension property that marks a question collection as a task.
pub const PROTOCOL_PROPERTY: &str = "X-ILOG-PROTOCOL";

impl QuestionCollection {
    /// `X-ILOG-PROTOCOL:TASK` marks a task question; anything else is a time diary.
    pub fn protocol(&self) -> DiaryOrTask {
        let task = self
            .extensions
            .iter()
            .any(|e| e.name.eq_ignore_ascii_case(PROTOCOL_PROPERTY) && e.value.eq_ignore_ascii_case("TASK"));
        if task {
            DiaryOrTask::Task
        } else {
            DiaryOrTask::TimeDiary
        }
    }
}

impl ExperimentPlan {
    /// Sorts every child list by id, the order [`serialize_plan`] emits.
    pub fn canonicalize(&mut self) {
        self.calendars.sort_by_key(|c| c.calendar_id);
        for cal in &mut self.calendars {
            cal.context_collections.sort_by_key(|c| c.id);
            for ctx in &mut cal.context_collections {
                ctx.question_collections.sort_by_key(|q| q.cid);
                ctx.sensor_collections.sort_by_key(|s| s.sid);
            }
        }
    }

    pub fn calendar(&self, id: u64) -> Option<&Calendar> {
        self.calendars.iter().find(|c| c.calendar_id == id)
    }

    /// Every question collection with its `(calendar, context)` ids.
    pub fn questions(&self) -> impl Iterator<Item = (u64, u64, &QuestionCollection)> {
        self.calendars.iter().flat_map(|cal| {
            cal.context_collections
                .iter()
                .flat_map(move |ctx| ctx.question_collections.iter().map(move |q| (cal.calendar_id, ctx.id, q)))
        })
    }

    pub fn sensors(&self) -> impl Iterator<Item = (u64, u64, &SensorCollection)> {
        self.calendars.iter().flat_map(|cal| {
            cal.context_collections
                .iter()
                .flat_map(move |ctx| ctx.sensor_collections.iter().map(move |s| (cal.calendar_id, ctx.id, s)))
        })
    }

    /// Earliest start and latest end over all collections.
    pub fn window(&self) -> Option<(Timestamp, Timestamp)> {
        let starts = self.questions().map(|(_, _, q)| (q.dtstart, q.dtend));
        let sensors = self.sensors().map(|(_, _, s)| (s.dtstart, s.dtend));
        starts.chain(sensors).fold(None, |acc, (s, e)| match acc {
            None => Some((s, e)),
            Some((a, b)) => Some((a.min(s), b.max(e))),
        })
    }
}
