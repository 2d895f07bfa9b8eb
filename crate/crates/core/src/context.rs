//! Situational contexts, life sequences and their knowledge-graph form.
//!
//! A context is a five-part snapshot of a person's situation: where they are
//! (`we`), what they are doing (`wa`), their internal state (`wi`), who they are
//! with (`wo`) and which tools they use (`wu`). A [`LifeSequence`] orders
//! contexts in time; intervals are half-open `[start, end)`, so two contexts may
//! touch at a boundary instant without overlapping.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::time::{TimeDelta, Timestamp};

/// Participant identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ParticipantId {
    fn from(s: &str) -> Self {
        Self(s.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("context {id} starts at {start} but does not end after it ({end})")]
    Order { id: String, start: Timestamp, end: Timestamp },
    #[error("context {id} starts at {start}, before the previous context ends at {previous_end}")]
    Overlap { id: String, start: Timestamp, previous_end: Timestamp },
    #[error("context {0} cannot be closed without at least one activity")]
    NoActivity(String),
    #[error("relation {label} references unknown entity {name:?}")]
    DanglingEdge { label: String, name: String },
    #[error("entity {0:?} declared twice")]
    DuplicateNode(String),
    #[error("{field} value {value:?} is not in the declared vocabulary")]
    Vocabulary { field: &'static str, value: String },
}

/// An activity carried out during part of a context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySpan {
    pub label: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SituationalContext {
    pub id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Spatial context: exactly one place at a time.
    pub we: Option<String>,
    /// Activities; unordered, may run in parallel.
    pub wa: Vec<String>,
    /// Internal state (mood).
    pub wi: Option<String>,
    /// People present; empty means alone.
    pub wo: Vec<String>,
    /// Tools in use.
    pub wu: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub activity_spans: Vec<ActivitySpan>,
    #[serde(default)]
    pub closed: bool,
}

impl SituationalContext {
    pub fn new(id: impl Into<String>, start: Timestamp, end: Timestamp) -> Result<Self, ContextError> {
        let id = id.into();
        if start >= end {
            return Err(ContextError::Order { id, start, end });
        }
        Ok(Self {
            id,
            start,
            end,
            we: None,
            wa: Vec::new(),
            wi: None,
            wo: Vec::new(),
            wu: Vec::new(),
            activity_spans: Vec::new(),
            closed: false,
        })
    }

    pub fn at(mut self, place: impl Into<String>) -> Self {
        self.we = Some(place.into());
        self
    }

    pub fn doing(mut self, activity: impl Into<String>) -> Self {
        self.wa.push(activity.into());
        self
    }

    pub fn feeling(mut self, mood: impl Into<String>) -> Self {
        self.wi = Some(mood.into());
        self
    }

    pub fn with(mut self, who: impl Into<String>) -> Self {
        self.wo.push(who.into());
        self
    }

    pub fn using(mut self, tool: impl Into<String>) -> Self {
        self.wu.push(tool.into());
        self
    }

    /// Finalizes the context; a closed context must name at least one activity.
    pub fn close(mut self) -> Result<Self, ContextError> {
        if self.wa.is_empty() {
            return Err(ContextError::NoActivity(self.id));
        }
        self.closed = true;
        Ok(self)
    }

    pub fn duration(&self) -> TimeDelta {
        self.end - self.start
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    fn check(&self) -> Result<(), ContextError> {
        if self.start >= self.end {
            return Err(ContextError::Order { id: self.id.clone(), start: self.start, end: self.end });
        }
        if self.closed && self.wa.is_empty() {
            return Err(ContextError::NoActivity(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifeSequence {
    pub person: ParticipantId,
    pub purpose: String,
    contexts: Vec<SituationalContext>,
}

impl LifeSequence {
    pub fn new(person: ParticipantId, purpose: impl Into<String>) -> Self {
        Self { person, purpose: purpose.into(), contexts: Vec::new() }
    }

    /// Builds a sequence from contexts in any order, rejecting overlaps.
    pub fn from_contexts(
        person: ParticipantId,
        purpose: impl Into<String>,
        mut contexts: Vec<SituationalContext>,
    ) -> Result<Self, ContextError> {
        contexts.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.id.cmp(&b.id)));
        contexts
            .into_iter()
            .try_fold(Self::new(person, purpose), |seq, ctx| seq.append_context(ctx))
    }

    /// Returns a new sequence with `ctx` appended at the tail.
    pub fn append_context(mut self, ctx: SituationalContext) -> Result<Self, ContextError> {
        ctx.check()?;
        if let Some(last) = self.contexts.last() {
            if ctx.start < last.end {
                return Err(ContextError::Overlap { id: ctx.id, start: ctx.start, previous_end: last.end });
            }
        }
        self.contexts.push(ctx);
        Ok(self)
    }

    pub fn contexts(&self) -> &[SituationalContext] {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// The unique context whose half-open interval contains `t`.
    pub fn context_at(&self, t: Timestamp) -> Option<&SituationalContext> {
        let idx = self.contexts.partition_point(|c| c.start <= t);
        let candidate = self.contexts.get(idx.checked_sub(1)?)?;
        candidate.contains(t).then_some(candidate)
    }

    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.contexts.first()?.start, self.contexts.last()?.end))
    }
}

/// Kind of entity a graph node stands for (Person, Room, Furniture, ...).
pub type EntityKind = String;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: EntityKind,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub label: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextGraph {
    nodes: BTreeMap<String, GraphNode>,
    edges: BTreeSet<GraphEdge>,
}

impl ContextGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: GraphNode) -> Result<(), ContextError> {
        if self.nodes.contains_key(&node.id) {
            return Err(ContextError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: GraphEdge) -> Result<(), ContextError> {
        for end in [&edge.source, &edge.target] {
            if !self.nodes.contains_key(end) {
                return Err(ContextError::DanglingEdge { label: edge.label.clone(), name: end.clone() });
            }
        }
        self.edges.insert(edge);
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter()
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// An entity taking part in a context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl EntitySpec {
    pub fn new(kind: impl Into<String>, name: impl Into<String>) -> Self {
        Self { kind: kind.into(), name: name.into(), attributes: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub source: String,
    pub label: String,
    pub target: String,
}

impl RelationSpec {
    pub fn new(source: impl Into<String>, label: impl Into<String>, target: impl Into<String>) -> Self {
        Self { source: source.into(), label: label.into(), target: target.into() }
    }
}

/// Builds the knowledge graph of one context: a node for the person, one per
/// entity, one edge per relation. The person node carries the mood.
pub fn context_to_graph(
    ctx: &SituationalContext,
    person: &str,
    entities: &[EntitySpec],
    relations: &[RelationSpec],
) -> Result<ContextGraph, ContextError> {
    let mut graph = ContextGraph::new();
    let mut attributes = BTreeMap::new();
    attributes.insert("Name".to_string(), person.to_string());
    if let Some(mood) = &ctx.wi {
        attributes.insert("Mood".to_string(), mood.clone());
    }
    graph.add_node(GraphNode { id: person.into(), kind: "Person".into(), attributes })?;
    for e in entities {
        graph.add_node(GraphNode { id: e.name.clone(), kind: e.kind.clone(), attributes: e.attributes.clone() })?;
    }
    for r in relations {
        graph.add_edge(GraphEdge { source: r.source.clone(), label: r.label.clone(), target: r.target.clone() })?;
    }
    Ok(graph)
}

/// Activity and place labels that cannot describe the same moment.
pub const IMPLAUSIBLE_PAIRS: &[(&str, &str)] = &[
    ("Driving", "University Classroom/library"),
    ("Driving", "Home Apartment/room"),
    ("Driving", "University Canteen"),
    ("Sleeping", "Restaurant/pub"),
    ("Sleeping", "In the street"),
    ("Lecture/seminar", "Restaurant/pub"),
];

/// Allowed categorical values for participant demographics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicVocabulary {
    pub genders: Vec<String>,
    pub degrees: Vec<String>,
    pub departments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub id: ParticipantId,
    pub gender: String,
    pub degree: String,
    pub department: String,
    /// IANA zone name, e.g. `Europe/Rome`.
    pub timezone: String,
}

impl ParticipantProfile {
    pub fn new(id: impl Into<String>, gender: &str, degree: &str, department: &str, timezone: &str) -> Self {
        Self {
            id: ParticipantId::new(id),
            gender: gender.into(),
            degree: degree.into(),
            department: department.into(),
            timezone: timezone.into(),
        }
    }

    pub fn check(&self, vocab: &DemographicVocabulary) -> Result<(), ContextError> {
        let fields: [(&'static str, &String, &Vec<String>); 3] = [
            ("gender", &self.gender, &vocab.genders),
            ("degree", &self.degree, &vocab.degrees),
            ("department", &self.department, &vocab.departments),
        ];
        for (field, value, allowed) in fields {
            if !allowed.contains(value) {
                return Err(ContextError::Vocabulary { field, value: value.clone() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: u32, m: u32) -> Timestamp {
        Timestamp::ymd_hms(2020, 11, 10, h, m, 0)
    }

    fn ctx(id: &str, a: (u32, u32), b: (u32, u32)) -> SituationalContext {
        SituationalContext::new(id, t(a.0, a.1), t(b.0, b.1)).unwrap().doing("x")
    }

    /// The pizzeria / driving / meeting afternoon used throughout the docs.
    fn everyday_life() -> LifeSequence {
        let lunch = SituationalContext::new("T1", t(12, 0), t(13, 0))
            .unwrap()
            .at("pizzeria")
            .doing("lunch")
            .with("John")
            .feeling("happy");
        let drive = SituationalContext::new("T2", t(13, 0), t(13, 30))
            .unwrap()
            .at("car")
            .doing("driving")
            .feeling("worried");
        let meeting = SituationalContext::new("T3", t(13, 30), t(15, 0))
            .unwrap()
            .at("office")
            .doing("meeting")
            .with("Bob")
            .feeling("neutral")
            .using("projector")
            .using("laptop");
        LifeSequence::from_contexts("me".into(), "afternoon", vec![lunch, drive, meeting]).unwrap()
    }

    #[test]
    fn append_to_empty_and_contiguous() {
        let seq = LifeSequence::new("me".into(), "day");
        let seq = seq.append_context(ctx("a", (12, 0), (13, 0))).unwrap();
        assert_eq!(seq.len(), 1);
        let seq = seq.append_context(ctx("b", (13, 0), (13, 30))).unwrap();
        assert_eq!(seq.len(), 2);
    }

    #[test]
    fn append_overlapping_is_rejected() {
        let seq = LifeSequence::new("me".into(), "day")
            .append_context(ctx("a", (12, 0), (13, 0)))
            .unwrap();
        let err = seq.append_context(ctx("b", (12, 50), (13, 30))).unwrap_err();
        assert!(matches!(err, ContextError::Overlap { .. }));
    }

    #[test]
    fn inverted_interval_is_order_error() {
        assert!(matches!(
            SituationalContext::new("a", t(13, 0), t(13, 0)),
            Err(ContextError::Order { .. })
        ));
    }

    #[test]
    fn closing_requires_activity() {
        let open = SituationalContext::new("a", t(9, 0), t(10, 0)).unwrap();
        assert!(matches!(open.clone().close(), Err(ContextError::NoActivity(_))));
        assert!(open.doing("study").close().unwrap().closed);
    }

    #[test]
    fn lookup_inside_gap_and_boundary() {
        let seq = everyday_life();
        assert_eq!(seq.context_at(t(14, 0)).unwrap().wa, vec!["meeting".to_string()]);
        assert_eq!(seq.context_at(t(13, 0)).unwrap().id, "T2");
        assert!(seq.context_at(t(15, 0)).is_none());
        assert!(seq.context_at(t(11, 59)).is_none());

        let gappy = LifeSequence::new("me".into(), "lectures")
            .append_context(ctx("a", (9, 0), (10, 0)))
            .unwrap()
            .append_context(ctx("b", (10, 15), (11, 0)))
            .unwrap();
        assert!(gappy.context_at(t(10, 5)).is_none());
    }

    #[test]
    fn meeting_graph() {
        let seq = everyday_life();
        let meeting = seq.context_at(t(14, 0)).unwrap();
        let entities = [
            EntitySpec::new("Person", "Bob"),
            EntitySpec::new("Room", "office"),
            EntitySpec::new("Furniture", "table"),
            EntitySpec::new("Place", "workplace"),
        ];
        let relations = [
            RelationSpec::new("office", "PartOf", "workplace"),
            RelationSpec::new("Bob", "In", "office"),
            RelationSpec::new("table", "In", "office"),
            RelationSpec::new("ME", "In", "office"),
        ];
        let g = context_to_graph(meeting, "ME", &entities, &relations).unwrap();
        assert_eq!(g.node_count(), 5);
        assert!(g.edges().any(|e| e.source == "office" && e.label == "PartOf" && e.target == "workplace"));
        assert_eq!(g.node("ME").unwrap().attributes.get("Mood").map(String::as_str), Some("neutral"));
    }

    #[test]
    fn empty_graph_has_only_person() {
        let c = ctx("a", (9, 0), (10, 0));
        let g = context_to_graph(&c, "ME", &[], &[]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn unknown_relation_endpoint() {
        let c = ctx("a", (9, 0), (10, 0));
        let err = context_to_graph(&c, "ME", &[], &[RelationSpec::new("ME", "In", "kitchen")]).unwrap_err();
        assert_eq!(err, ContextError::DanglingEdge { label: "In".into(), name: "kitchen".into() });
    }

    #[test]
    fn profile_vocabulary() {
        let vocab = DemographicVocabulary {
            genders: vec!["Female".into(), "Male".into()],
            degrees: vec!["BSc".into(), "MA+PhD".into()],
            departments: vec!["Sociology".into()],
        };
        let ok = ParticipantProfile::new("p1", "Female", "BSc", "Sociology", "Europe/Rome");
        assert!(ok.check(&vocab).is_ok());
        let bad = ParticipantProfile::new("p1", "Female", "PhD", "Sociology", "Europe/Rome");
        assert!(matches!(bad.check(&vocab), Err(ContextError::Vocabulary { field: "degree", .. })));
    }
}
