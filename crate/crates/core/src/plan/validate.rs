use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{ExperimentPlan, QType, QuestionCollection, RecurrenceRule, SensorCollection};
use crate::schedule::expand::occurrence_count;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Stable machine-readable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    Syntax,
    UnbalancedComponent,
    UnsupportedComponent,
    MissingProperty,
    RepeatedProperty,
    InvalidValue,
    DuplicateId,
    EmptyPlan,
    WindowOrder,
    RuleBounds,
    AnswerOptions,
    QuestionFrequencyExtension,
    SensorFrequencyExtension,
    CountExceedsWindow,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::Syntax => "syntax",
            DiagnosticCode::UnbalancedComponent => "unbalanced_component",
            DiagnosticCode::UnsupportedComponent => "unsupported_component",
            DiagnosticCode::MissingProperty => "missing_property",
            DiagnosticCode::RepeatedProperty => "repeated_property",
            DiagnosticCode::InvalidValue => "invalid_value",
            DiagnosticCode::DuplicateId => "duplicate_id",
            DiagnosticCode::EmptyPlan => "empty_plan",
            DiagnosticCode::WindowOrder => "window_order",
            DiagnosticCode::RuleBounds => "rule_bounds",
            DiagnosticCode::AnswerOptions => "answer_options",
            DiagnosticCode::QuestionFrequencyExtension => "question_frequency_extension",
            DiagnosticCode::SensorFrequencyExtension => "sensor_frequency_extension",
            DiagnosticCode::CountExceedsWindow => "count_exceeds_window",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    /// Location in the plan tree, e.g. `calendar[2]/context[1]/question[3]`.
    pub path: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl Diagnostic {
    pub fn error(code: DiagnosticCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, path: path.into(), message: message.into(), line: None }
    }

    pub fn warning(code: DiagnosticCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code, path: path.into(), message: message.into(), line: None }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.line {
            Some(line) => write!(f, "{sev}[{}] line {line} {}: {}", self.code.as_str(), self.path, self.message),
            None => write!(f, "{sev}[{}] {}: {}", self.code.as_str(), self.path, self.message),
        }
    }
}

/// Checks every plan invariant and cross-reference. An empty result means the
/// plan is valid; warnings flag documented extensions of the question and
/// sensor frequency sets and rules whose count cannot fit in their window.
pub fn validate_plan(plan: &ExperimentPlan) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if plan.calendars.is_empty() {
        diags.push(Diagnostic::error(DiagnosticCode::EmptyPlan, "plan", "plan declares no calendars"));
    }
    let mut cal_ids = BTreeSet::new();
    for cal in &plan.calendars {
        let cal_path = format!("calendar[{}]", cal.calendar_id);
        if !cal_ids.insert(cal.calendar_id) {
            diags.push(duplicate(&cal_path, cal.calendar_id));
        }
        let mut ctx_ids = BTreeSet::new();
        for ctx in &cal.context_collections {
            let ctx_path = format!("{cal_path}/context[{}]", ctx.id);
            if !ctx_ids.insert(ctx.id) {
                diags.push(duplicate(&ctx_path, ctx.id));
            }
            let mut cids = BTreeSet::new();
            for q in &ctx.question_collections {
                let path = format!("{ctx_path}/question[{}]", q.cid);
                if !cids.insert(q.cid) {
                    diags.push(duplicate(&path, q.cid));
                }
                check_question(q, &path, &mut diags);
            }
            let mut sids = BTreeSet::new();
            for s in &ctx.sensor_collections {
                let path = format!("{ctx_path}/sensor[{}]", s.sid);
                if !sids.insert(s.sid) {
                    diags.push(duplicate(&path, s.sid));
                }
                check_sensor(s, &path, &mut diags);
            }
        }
    }
    diags
}

fn duplicate(path: &str, id: u64) -> Diagnostic {
    Diagnostic::error(DiagnosticCode::DuplicateId, path, format!("id {id} is used twice in the same parent"))
}

pub(crate) fn check_question(q: &QuestionCollection, path: &str, diags: &mut Vec<Diagnostic>) {
    check_window(q.dtstart, q.dtend, &q.rrule, path, diags);
    if q.rrule.frequency.is_sub_daily() {
        diags.push(Diagnostic::warning(
            DiagnosticCode::QuestionFrequencyExtension,
            path,
            format!(
                "question frequency {} extends the question frequency set (DAILY, WEEKLY, MONTHLY, YEARLY)",
                q.rrule.frequency
            ),
        ));
    }
    if q.question.answer_options.iter().any(String::is_empty) {
        diags.push(Diagnostic::error(DiagnosticCode::AnswerOptions, path, "answer options must not be empty text"));
    }
    let n = q.question.answer_options.len();
    let problem = match q.question.qtype {
        QType::SingleChoice | QType::MultipleChoice if n == 0 => Some("requires at least one answer option"),
        QType::Dichotomous if n != 2 => Some("requires exactly two answer options"),
        QType::FreeText if n != 0 => Some("must not declare answer options"),
        _ => None,
    };
    if let Some(problem) = problem {
        diags.push(Diagnostic::error(
            DiagnosticCode::AnswerOptions,
            path,
            format!("{} question {problem}, found {n}", q.question.qtype),
        ));
    }
}

pub(crate) fn check_sensor(s: &SensorCollection, path: &str, diags: &mut Vec<Diagnostic>) {
    check_window(s.dtstart, s.dtend, &s.rrule, path, diags);
    if !s.rrule.frequency.is_sub_daily() {
        diags.push(Diagnostic::warning(
            DiagnosticCode::SensorFrequencyExtension,
            path,
            format!(
                "sensor frequency {} extends the sensor frequency set (X-MILLISECOND, X-SECOND, X-MINUTE, X-HOUR)",
                s.rrule.frequency
            ),
        ));
    }
}

fn check_window(start: Timestamp, end: Timestamp, rule: &RecurrenceRule, path: &str, diags: &mut Vec<Diagnostic>) {
    if rule.interval == 0 || rule.count == 0 {
        diags.push(Diagnostic::error(DiagnosticCode::RuleBounds, path, "INTERVAL and COUNT must be at least 1"));
        return;
    }
    if start >= end {
        diags.push(Diagnostic::error(
            DiagnosticCode::WindowOrder,
            path,
            format!("DTEND {} is not after DTSTART {}", end.to_ical(), start.to_ical()),
        ));
        return;
    }
    let fits = occurrence_count(rule, start, end);
    if fits < rule.count {
        diags.push(Diagnostic::warning(
            DiagnosticCode::CountExceedsWindow,
            path,
            format!("COUNT={} but only {fits} occurrences fit before DTEND", rule.count),
        ));
    }
}
