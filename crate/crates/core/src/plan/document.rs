//! Reading and writing `.ilogcal` documents.
//!
//! ```text
//! BEGIN:VCALENDAR
//! VERSION:2.0
//! PRODID:-//ilog//iLogCal 1.0//EN
//! UID:2
//! X-ILOG-USER:unitn-2020
//! BEGIN:X-ILOG-CONTEXT
//! UID:1
//! BEGIN:X-ILOG-QUESTION
//! UID:1
//! DTSTART:20201102T080000Z
//! DTEND:20201116T080000Z
//! STATUS:1
//! RRULE:FREQ=X-MINUTE;INTERVAL=30;COUNT=672
//! X-QID:1
//! X-QCATEGORY:WA
//! X-QCONTENT:What are you doing?
//! X-QOPTIONS:Lesson,Study,Eating
//! X-QTYPE:SINGLE-CHOICE
//! END:X-ILOG-QUESTION
//! END:X-ILOG-CONTEXT
//! END:VCALENDAR
//! ```
//!
//! A document may hold several `VCALENDAR` objects, one per calendar of the plan.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ical::{self, ContentLine};
use super::validate::{validate_plan, Diagnostic, DiagnosticCode};
use super::*;

pub const PRODID: &str = "-//ilog//iLogCal 1.0//EN";

const CALENDAR: &str = "VCALENDAR";
const CONTEXT: &str = "X-ILOG-CONTEXT";
const QUESTION: &str = "X-ILOG-QUESTION";
const SENSOR: &str = "X-ILOG-SENSOR";

/// Result of a lenient parse: whatever could be built, plus every problem found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedDocument {
    pub plan: ExperimentPlan,
    pub diagnostics: Vec<Diagnostic>,
}

impl CheckedDocument {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

/// Parses a document into a valid plan, failing on the first error.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan, PlanError> {
    let checked = check_document(text);
    if let Some(d) = checked.errors().next() {
        return Err(to_error(d));
    }
    Ok(checked.plan)
}

fn to_error(d: &Diagnostic) -> PlanError {
    match d.code {
        DiagnosticCode::Syntax | DiagnosticCode::UnbalancedComponent | DiagnosticCode::UnsupportedComponent => {
            PlanError::Syntax { line: d.line.unwrap_or(0), reason: d.message.clone() }
        }
        DiagnosticCode::DuplicateId => {
            let id = d
                .path
                .rsplit_once('[')
                .and_then(|(_, tail)| tail.trim_end_matches(']').parse().ok())
                .unwrap_or(0);
            PlanError::DuplicateId { path: d.path.clone(), id }
        }
        _ => PlanError::Validation { path: d.path.clone(), reason: d.message.clone() },
    }
}

#[derive(Debug)]
struct Component {
    name: String,
    line: usize,
    props: Vec<ContentLine>,
    children: Vec<Component>,
}

/// Parses as much of the document as possible and reports every syntax,
/// vocabulary and invariant problem as a diagnostic.
pub fn check_document(text: &str) -> CheckedDocument {
    let mut diags = Vec::new();
    let roots = build_tree(text, &mut diags);

    let mut plan = ExperimentPlan { user: String::new(), calendars: Vec::new() };
    let mut user_seen: Option<String> = None;
    let mut dropped_calendar = false;
    for root in roots {
        if root.name != CALENDAR {
            diags.push(unsupported(&root, "document"));
            continue;
        }
        match read_calendar(root, &mut user_seen, &mut diags) {
            Some(cal) => plan.calendars.push(cal),
            None => dropped_calendar = true,
        }
    }
    plan.user = user_seen.unwrap_or_default();
    plan.canonicalize();
    diags.extend(
        validate_plan(&plan)
            .into_iter()
            .filter(|d| !(dropped_calendar && d.code == DiagnosticCode::EmptyPlan)),
    );
    CheckedDocument { plan, diagnostics: diags }
}

fn build_tree(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Component> {
    let mut roots = Vec::new();
    let mut stack: Vec<Component> = Vec::new();
    for (line_no, raw) in ical::unfold(text) {
        let line = match ical::parse_line(line_no, &raw) {
            Ok(l) => l,
            Err(reason) => {
                diags.push(Diagnostic::error(DiagnosticCode::Syntax, "document", reason).at_line(line_no));
                continue;
            }
        };
        match line.name.as_str() {
            "BEGIN" => stack.push(Component {
                name: line.value.to_ascii_uppercase(),
                line: line_no,
                props: Vec::new(),
                children: Vec::new(),
            }),
            "END" => {
                let name = line.value.to_ascii_uppercase();
                match stack.pop() {
                    Some(c) if c.name == name => match stack.last_mut() {
                        Some(parent) => parent.children.push(c),
                        None => roots.push(c),
                    },
                    Some(c) => {
                        diags.push(
                            Diagnostic::error(
                                DiagnosticCode::UnbalancedComponent,
                                "document",
                                format!("END:{name} closes BEGIN:{} from line {}", c.name, c.line),
                            )
                            .at_line(line_no),
                        );
                    }
                    None => diags.push(
                        Diagnostic::error(
                            DiagnosticCode::UnbalancedComponent,
                            "document",
                            format!("END:{name} without matching BEGIN"),
                        )
                        .at_line(line_no),
                    ),
                }
            }
            _ => match stack.last_mut() {
                Some(c) => c.props.push(line),
                None => diags.push(
                    Diagnostic::error(DiagnosticCode::Syntax, "document", "property outside of any component")
                        .at_line(line_no),
                ),
            },
        }
    }
    for open in stack {
        diags.push(
            Diagnostic::error(
                DiagnosticCode::UnbalancedComponent,
                "document",
                format!("BEGIN:{} is never closed", open.name),
            )
            .at_line(open.line),
        );
    }
    roots
}

fn unsupported(c: &Component, parent: &str) -> Diagnostic {
    Diagnostic::error(
        DiagnosticCode::UnsupportedComponent,
        parent,
        format!("component {} is not supported here", c.name),
    )
    .at_line(c.line)
}

/// Known properties of one component, split from opaque extensions.
struct Props<'a> {
    path: String,
    line: usize,
    known: BTreeMap<&'static str, ContentLine>,
    extensions: Vec<Extension>,
    diags: &'a mut Vec<Diagnostic>,
    ok: bool,
}

impl<'a> Props<'a> {
    fn collect(
        comp_props: Vec<ContentLine>,
        known_names: &[&'static str],
        path: String,
        line: usize,
        diags: &'a mut Vec<Diagnostic>,
    ) -> Self {
        let mut known = BTreeMap::new();
        let mut extensions = Vec::new();
        for p in comp_props {
            match known_names.iter().find(|k| **k == p.name) {
                Some(k) => {
                    if known.contains_key(k) {
                        diags.push(
                            Diagnostic::error(
                                DiagnosticCode::RepeatedProperty,
                                path.clone(),
                                format!("property {k} appears more than once"),
                            )
                            .at_line(p.line),
                        );
                    } else {
                        known.insert(*k, p);
                    }
                }
                None => extensions.push(Extension { name: p.name, params: p.params, value: p.value }),
            }
        }
        Self { path, line, known, extensions, diags, ok: true }
    }

    fn optional<T>(&mut self, name: &'static str, parse: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        let prop = self.known.get(name)?;
        match parse(&prop.value) {
            Ok(v) => Some(v),
            Err(reason) => {
                let line = prop.line;
                self.diags.push(
                    Diagnostic::error(DiagnosticCode::InvalidValue, self.path.clone(), format!("{name}: {reason}"))
                        .at_line(line),
                );
                self.ok = false;
                None
            }
        }
    }

    fn required<T>(&mut self, name: &'static str, parse: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        if !self.known.contains_key(name) {
            self.diags.push(
                Diagnostic::error(DiagnosticCode::MissingProperty, self.path.clone(), format!("missing {name}"))
                    .at_line(self.line),
            );
            self.ok = false;
            return None;
        }
        self.optional(name, parse)
    }
}

fn parse_id(v: &str) -> Result<u64, String> {
    v.trim().parse::<u64>().map_err(|_| format!("{v:?} is not a non-negative integer id"))
}

fn parse_time(v: &str) -> Result<Timestamp, String> {
    Timestamp::parse_ical(v.trim()).map_err(|e| e.to_string())
}

fn parse_text(v: &str) -> Result<String, String> {
    ical::unescape_text(v)
}

fn parse_status(v: &str) -> Result<bool, String> {
    match v.trim().to_ascii_uppercase().as_str() {
        "1" | "ACCEPTED" => Ok(true),
        "0" | "REJECTED" => Ok(false),
        other => Err(format!("{other:?} is not 1 (accepted) or 0 (rejected)")),
    }
}

fn vocab<T: FromStr<Err = ()>>(what: &'static str) -> impl FnOnce(&str) -> Result<T, String> {
    move |v| v.trim().parse::<T>().map_err(|_| format!("{v:?} is not a known {what}"))
}

/// Reads the component id up front so child paths can name it.
fn peek_id(c: &Component) -> Option<u64> {
    c.props.iter().find(|p| p.name == "UID").and_then(|p| parse_id(&p.value).ok())
}

fn id_label(id: Option<u64>) -> String {
    id.map_or_else(|| "?".to_string(), |i| i.to_string())
}

fn read_calendar(
    comp: Component,
    user_seen: &mut Option<String>,
    diags: &mut Vec<Diagnostic>,
) -> Option<Calendar> {
    let path = format!("calendar[{}]", id_label(peek_id(&comp)));
    let mut props = Props::collect(comp.props, &["UID", "VERSION", "PRODID", "X-ILOG-USER"], path.clone(), comp.line, diags);
    let id = props.required("UID", parse_id);
    if let Some(user) = props.optional("X-ILOG-USER", parse_text) {
        match user_seen {
            Some(prev) if *prev != user => {
                props.diags.push(Diagnostic::error(
                    DiagnosticCode::InvalidValue,
                    path.clone(),
                    format!("X-ILOG-USER {user:?} differs from {prev:?} declared earlier"),
                ));
                props.ok = false;
            }
            _ => *user_seen = Some(user),
        }
    }
    let ok = props.ok;
    let extensions = props.extensions;
    let mut contexts = Vec::new();
    for child in comp.children {
        if child.name != CONTEXT {
            diags.push(unsupported(&child, &path));
            continue;
        }
        if let Some(ctx) = read_context(child, &path, diags) {
            contexts.push(ctx);
        }
    }
    match (ok, id) {
        (true, Some(calendar_id)) => Some(Calendar { calendar_id, context_collections: contexts, extensions }),
        _ => None,
    }
}

fn read_context(comp: Component, parent: &str, diags: &mut Vec<Diagnostic>) -> Option<ContextCollection> {
    let path = format!("{parent}/context[{}]", id_label(peek_id(&comp)));
    let mut props = Props::collect(comp.props, &["UID"], path.clone(), comp.line, diags);
    let id = props.required("UID", parse_id);
    let ok = props.ok;
    let extensions = props.extensions;
    let id = id.filter(|_| ok)?;
    let mut ctx = ContextCollection { id, question_collections: Vec::new(), sensor_collections: Vec::new(), extensions };
    for child in comp.children {
        match child.name.as_str() {
            QUESTION => ctx.question_collections.extend(read_question(child, &path, diags)),
            SENSOR => ctx.sensor_collections.extend(read_sensor(child, &path, diags)),
            _ => diags.push(unsupported(&child, &path)),
        }
    }
    Some(ctx)
}

const QUESTION_PROPS: &[&str] = &[
    "UID", "DTSTART", "DTEND", "STATUS", "RRULE", "X-QID", "X-QCATEGORY", "X-QCONTENT", "X-QOPTIONS", "X-QTYPE",
    "X-QANSWER",
];

fn read_question(comp: Component, parent: &str, diags: &mut Vec<Diagnostic>) -> Option<QuestionCollection> {
    let path = format!("{parent}/question[{}]", id_label(peek_id(&comp)));
    for child in &comp.children {
        diags.push(unsupported(child, &path));
    }
    let mut p = Props::collect(comp.props, QUESTION_PROPS, path, comp.line, diags);
    let cid = p.required("UID", parse_id);
    let dtstart = p.required("DTSTART", parse_time);
    let dtend = p.required("DTEND", parse_time);
    let status = p.optional("STATUS", parse_status).unwrap_or(true);
    let rrule = p.required("RRULE", RecurrenceRule::parse);
    let qid = p.required("X-QID", parse_id);
    let qcategory = p.required("X-QCATEGORY", vocab::<QCategory>("question category"));
    let content = p.required("X-QCONTENT", parse_text);
    let options = p.optional("X-QOPTIONS", ical::split_text_list).unwrap_or_default();
    let qtype = p.required("X-QTYPE", vocab::<QType>("question type"));
    let answer = p.optional("X-QANSWER", parse_text);
    if !p.ok {
        return None;
    }
    Some(QuestionCollection {
        cid: cid?,
        dtstart: dtstart?,
        dtend: dtend?,
        status,
        rrule: rrule?,
        question: Question {
            qid: qid?,
            qcategory: qcategory?,
            question_content: content?,
            answer_options: options,
            qtype: qtype?,
            answer_content: answer,
        },
        extensions: p.extensions,
    })
}

const SENSOR_PROPS: &[&str] =
    &["UID", "DTSTART", "DTEND", "RRULE", "X-SENSOR-NAME", "X-SENSOR-DESC", "X-SENSOR-TYPE"];

fn read_sensor(comp: Component, parent: &str, diags: &mut Vec<Diagnostic>) -> Option<SensorCollection> {
    let path = format!("{parent}/sensor[{}]", id_label(peek_id(&comp)));
    for child in &comp.children {
        diags.push(unsupported(child, &path));
    }
    let mut p = Props::collect(comp.props, SENSOR_PROPS, path, comp.line, diags);
    let sid = p.required("UID", parse_id);
    let dtstart = p.required("DTSTART", parse_time);
    let dtend = p.required("DTEND", parse_time);
    let rrule = p.required("RRULE", RecurrenceRule::parse);
    let name = p.required("X-SENSOR-NAME", parse_text);
    let description = p.optional("X-SENSOR-DESC", parse_text).unwrap_or_default();
    let sensor_type = p.required("X-SENSOR-TYPE", vocab::<SensorType>("sensor type"));
    if !p.ok {
        return None;
    }
    Some(SensorCollection {
        sid: sid?,
        dtstart: dtstart?,
        dtend: dtend?,
        rrule: rrule?,
        sensor: Sensor { name: name?, description, sensor_type: sensor_type? },
        extensions: p.extensions,
    })
}

/// Writes the plan as CRLF content lines, children sorted by id. Deterministic.
pub fn serialize_plan(plan: &ExperimentPlan) -> String {
    let mut plan = plan.clone();
    plan.canonicalize();
    let mut out = String::new();
    for cal in &plan.calendars {
        line(&mut out, "BEGIN", CALENDAR);
        line(&mut out, "VERSION", "2.0");
        line(&mut out, "PRODID", PRODID);
        line(&mut out, "UID", &cal.calendar_id.to_string());
        line(&mut out, "X-ILOG-USER", &ical::escape_text(&plan.user));
        extensions(&mut out, &cal.extensions);
        for ctx in &cal.context_collections {
            line(&mut out, "BEGIN", CONTEXT);
            line(&mut out, "UID", &ctx.id.to_string());
            extensions(&mut out, &ctx.extensions);
            for q in &ctx.question_collections {
                line(&mut out, "BEGIN", QUESTION);
                line(&mut out, "UID", &q.cid.to_string());
                line(&mut out, "DTSTART", &q.dtstart.to_ical());
                line(&mut out, "DTEND", &q.dtend.to_ical());
                line(&mut out, "STATUS", if q.status { "1" } else { "0" });
                line(&mut out, "RRULE", &q.rrule.to_string());
                line(&mut out, "X-QID", &q.question.qid.to_string());
                line(&mut out, "X-QCATEGORY", q.question.qcategory.as_str());
                line(&mut out, "X-QCONTENT", &ical::escape_text(&q.question.question_content));
                if !q.question.answer_options.is_empty() {
                    line(&mut out, "X-QOPTIONS", &ical::join_text_list(&q.question.answer_options));
                }
                line(&mut out, "X-QTYPE", q.question.qtype.as_str());
                if let Some(answer) = &q.question.answer_content {
                    line(&mut out, "X-QANSWER", &ical::escape_text(answer));
                }
                extensions(&mut out, &q.extensions);
                line(&mut out, "END", QUESTION);
            }
            for s in &ctx.sensor_collections {
                line(&mut out, "BEGIN", SENSOR);
                line(&mut out, "UID", &s.sid.to_string());
                line(&mut out, "DTSTART", &s.dtstart.to_ical());
                line(&mut out, "DTEND", &s.dtend.to_ical());
                line(&mut out, "RRULE", &s.rrule.to_string());
                line(&mut out, "X-SENSOR-NAME", &ical::escape_text(&s.sensor.name));
                line(&mut out, "X-SENSOR-DESC", &ical::escape_text(&s.sensor.description));
                line(&mut out, "X-SENSOR-TYPE", s.sensor.sensor_type.as_str());
                extensions(&mut out, &s.extensions);
                line(&mut out, "END", SENSOR);
            }
            line(&mut out, "END", CONTEXT);
        }
        line(&mut out, "END", CALENDAR);
    }
    out
}

fn line(out: &mut String, name: &str, value: &str) {
    ical::write_line(name, &[], value, out);
}

fn extensions(out: &mut String, exts: &[Extension]) {
    for e in exts {
        ical::write_line(&e.name, &e.params, &e.value, out);
    }
}
