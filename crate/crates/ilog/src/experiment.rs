//! One experiment's in-memory state, rebuilt from its logs, and every
//! operation the service exposes on it. Nothing here touches the network;
//! persistence happens through [`Storage`] before state changes are committed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use ilog_core::context::{ParticipantId, ParticipantProfile};
use ilog_core::plan::{check_document, Diagnostic, ExperimentPlan};
use ilog_core::predictor::{extract_features, train_eval, ClassifierSpec, EvalOptions, EvalReport, Protocol, TrainError};
use ilog_core::quality::{
    compliance_heatmap, dashboard_summary, participant_metrics, rank_all, run_quality_checks, AuthorizationError,
    CheckConfig, DashboardSummary, Heatmap, ParticipantMetrics, ParticipantRanking, QualityFlag, QualityParameters,
};
use ilog_core::schedule::{compile, Actor, AuditRecord, Revision, RevisionError, Timeline, TimelineEntry};
use ilog_core::sim::{lifecycles, record_order, LogRecord};
use ilog_core::time::{Date, Timestamp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::store::{BatchRecord, Settings, Storage, StoreError, StoredExperiment};
use crate::zones::TzDatabase;

/// Most records one stream page carries.
pub const STREAM_PAGE: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("experiment {0:?} not found")]
    NotFound(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("principal acting as {role} cannot submit a revision by {actor}")]
    RoleMismatch { role: String, actor: String },
    #[error("experiment has no plan yet")]
    NoPlan,
    #[error("plan is invalid")]
    InvalidPlan(Vec<Diagnostic>),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Revision(#[from] RevisionError),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<AuthorizationError> for ExpError {
    fn from(e: AuthorizationError) -> Self {
        ExpError::Forbidden(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBatch {
    pub batch_id: String,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestAck {
    pub batch_id: String,
    /// Offset just past the batch; equals the log length after a fresh batch.
    pub offset: u64,
    pub accepted: u64,
    /// The batch id had been ingested before; nothing was appended.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetRecord {
    pub offset: u64,
    pub record: LogRecord,
}

/// A flag placed at the offset of its newest evidence record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetFlag {
    pub offset: u64,
    pub flag: QualityFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamPage {
    pub from: u64,
    pub next_offset: u64,
    pub records: Vec<OffsetRecord>,
    pub flags: Vec<OffsetFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineView {
    pub generation: u64,
    pub version: u64,
    pub participants: BTreeMap<ParticipantId, Vec<TimelineEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantData {
    pub participant: ParticipantId,
    pub as_of_offset: u64,
    pub metrics: Option<ParticipantMetrics>,
    pub records: Vec<OffsetRecord>,
    pub next_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub participant: ParticipantId,
    pub metrics: Option<ParticipantMetrics>,
    pub ranking: Option<ParticipantRanking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub as_of_offset: u64,
    pub generation: u64,
    pub timeline_version: u64,
    pub now: Timestamp,
    pub rankings: Vec<ParticipantRanking>,
    pub flags: Vec<OffsetFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionAck {
    pub generation: u64,
    pub version: u64,
    pub record: AuditRecord,
}

/// The log in record order, with each record's ingest offset, and the flags
/// found in it. Rebuilt lazily after appends.
#[derive(Debug)]
struct View {
    sorted: Vec<LogRecord>,
    flags: Vec<OffsetFlag>,
}

#[derive(Debug)]
pub struct Experiment {
    pub id: String,
    plan_text: Option<String>,
    plan: Option<ExperimentPlan>,
    participants: Vec<ParticipantProfile>,
    settings: Settings,
    compiled: Option<Timeline>,
    timeline: Option<Timeline>,
    events: Vec<LogRecord>,
    batches: HashMap<String, BatchRecord>,
    view: Mutex<Option<Arc<View>>>,
}

fn forbidden(msg: impl Into<String>) -> ExpError {
    ExpError::Forbidden(msg.into())
}

/// The participant a viewer may see: researchers and the platform anyone
/// (or everyone when `requested` is `None`), participants only themselves.
fn scope(viewer: &Actor, requested: Option<&ParticipantId>) -> Result<Option<ParticipantId>, ExpError> {
    match (viewer, requested) {
        (Actor::Participant(me), Some(p)) if p != me => Err(forbidden(format!("participant {me} cannot view {p}"))),
        (Actor::Participant(me), _) => Ok(Some(me.clone())),
        (_, p) => Ok(p.cloned()),
    }
}

fn researcher_only(viewer: &Actor, what: &str) -> Result<(), ExpError> {
    match viewer {
        Actor::Researcher => Ok(()),
        other => Err(forbidden(format!("{other} cannot {what}"))),
    }
}

fn compile_plan(plan: &ExperimentPlan, participants: &[ParticipantProfile]) -> Result<Timeline, ExpError> {
    compile(plan, participants).map_err(|e| ExpError::Schema(e.to_string()))
}

impl Experiment {
    pub fn new(id: &str) -> Self {
        Self::restore(id, StoredExperiment::default()).expect("empty experiment")
    }

    /// Rebuilds state by compiling the stored plan and folding the audit log
    /// over it.
    pub fn restore(id: &str, stored: StoredExperiment) -> Result<Self, ExpError> {
        let mut exp = Experiment {
            id: id.into(),
            plan_text: None,
            plan: None,
            participants: stored.participants,
            settings: stored.settings,
            compiled: None,
            timeline: None,
            events: stored.events,
            batches: stored.batches.into_iter().map(|b| (b.batch_id.clone(), b)).collect(),
            view: Mutex::new(None),
        };
        if let Some(text) = stored.plan {
            let checked = check_document(&text);
            if checked.has_errors() {
                return Err(ExpError::InvalidPlan(checked.diagnostics));
            }
            let compiled = compile_plan(&checked.plan, &exp.participants)?;
            let timeline = Timeline::replay(&compiled, &stored.audit)?;
            exp.plan_text = Some(text);
            exp.plan = Some(checked.plan);
            exp.compiled = Some(compiled);
            exp.timeline = Some(timeline);
        }
        Ok(exp)
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn plan_text(&self) -> Option<&str> {
        self.plan_text.as_deref()
    }

    pub fn participants(&self) -> &[ParticipantProfile] {
        &self.participants
    }

    pub fn offset(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn timeline(&self) -> Result<&Timeline, ExpError> {
        self.timeline.as_ref().ok_or(ExpError::NoPlan)
    }

    pub fn version(&self) -> u64 {
        self.timeline.as_ref().map_or(0, Timeline::version)
    }

    /// Latest event time, else the plan start. Every derived view defaults
    /// to this instant so it depends only on the logs.
    pub fn as_of(&self) -> Timestamp {
        self.events
            .iter()
            .map(LogRecord::at)
            .max()
            .or_else(|| self.plan.as_ref().and_then(|p| p.window()).map(|w| w.0))
            .unwrap_or(Timestamp::from_millis(0))
    }

    fn view(&self) -> Arc<View> {
        let mut slot = self.view.lock().expect("view lock");
        if let Some(v) = slot.as_ref() {
            return Arc::clone(v);
        }
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.sort_by(|&a, &b| record_order(&self.events[a], &self.events[b]).then(a.cmp(&b)));
        let sorted: Vec<LogRecord> = order.iter().map(|&i| self.events[i].clone()).collect();
        let offsets: Vec<u64> = order.iter().map(|&i| i as u64).collect();
        let last = offsets.len().saturating_sub(1) as u64;
        let mut flags: Vec<OffsetFlag> = run_quality_checks(&sorted, self.timeline.as_ref(), &CheckConfig::default())
            .into_iter()
            .map(|mut flag| {
                for e in &mut flag.evidence {
                    *e = offsets[*e] as usize;
                }
                let offset = flag.evidence.iter().max().map_or(last, |&e| e as u64);
                OffsetFlag { offset, flag }
            })
            .collect();
        flags.sort_by_key(|f| f.offset);
        let v = Arc::new(View { sorted, flags });
        *slot = Some(Arc::clone(&v));
        v
    }

    fn invalidate(&self) {
        *self.view.lock().expect("view lock") = None;
    }

    fn recompile(&self, plan: &ExperimentPlan, participants: &[ParticipantProfile]) -> Result<Timeline, ExpError> {
        compile_plan(plan, participants)
    }

    /// Replaces the plan. Starts a new generation: the audit log is archived
    /// and the timeline is recompiled from scratch. Returns the warnings.
    pub fn put_plan(&mut self, store: &dyn Storage, viewer: &Actor, text: String) -> Result<Vec<Diagnostic>, ExpError> {
        researcher_only(viewer, "replace the plan")?;
        let checked = check_document(&text);
        if checked.has_errors() {
            return Err(ExpError::InvalidPlan(checked.diagnostics));
        }
        let compiled = self.recompile(&checked.plan, &self.participants)?;
        let mut settings = self.settings.clone();
        settings.generation += 1;
        store.create(&self.id)?;
        store.archive_audit(&self.id, self.settings.generation)?;
        store.write_settings(&self.id, &settings)?;
        store.write_plan(&self.id, &text)?;
        self.settings = settings;
        self.plan_text = Some(text);
        self.plan = Some(checked.plan);
        self.timeline = Some(compiled.clone());
        self.compiled = Some(compiled);
        self.invalidate();
        Ok(checked.diagnostics)
    }

    pub fn put_participants(
        &mut self,
        store: &dyn Storage,
        viewer: &Actor,
        participants: Vec<ParticipantProfile>,
    ) -> Result<(), ExpError> {
        researcher_only(viewer, "replace the participant list")?;
        let ids: BTreeSet<&ParticipantId> = participants.iter().map(|p| &p.id).collect();
        if ids.len() != participants.len() {
            return Err(ExpError::Schema("participant ids must be unique".into()));
        }
        for p in &participants {
            ilog_core::time::ZoneDb::offset(&TzDatabase, &p.timezone, Timestamp::from_millis(0))
                .map_err(|e| ExpError::Schema(format!("{}: {e}", p.id)))?;
        }
        let compiled = match &self.plan {
            Some(plan) => Some(self.recompile(plan, &participants)?),
            None => None,
        };
        let mut settings = self.settings.clone();
        settings.generation += 1;
        store.create(&self.id)?;
        store.archive_audit(&self.id, self.settings.generation)?;
        store.write_settings(&self.id, &settings)?;
        store.write_participants(&self.id, &participants)?;
        self.settings = settings;
        self.participants = participants;
        self.timeline = compiled.clone();
        self.compiled = compiled;
        self.invalidate();
        Ok(())
    }

    pub fn get_participants(&self, viewer: &Actor, subject: Option<&ParticipantId>) -> Result<Vec<ParticipantProfile>, ExpError> {
        let who = scope(viewer, subject)?;
        Ok(self.participants.iter().filter(|p| who.as_ref().is_none_or(|w| w == &p.id)).cloned().collect())
    }

    pub fn put_settings(&mut self, store: &dyn Storage, viewer: &Actor, f: impl FnOnce(&mut Settings)) -> Result<(), ExpError> {
        researcher_only(viewer, "change settings")?;
        let mut settings = self.settings.clone();
        let generation = settings.generation;
        f(&mut settings);
        settings.generation = generation;
        settings.quality.check().map_err(|e| ExpError::BadRequest(e.into()))?;
        settings.policy.check().map_err(|e| ExpError::BadRequest(e.into()))?;
        store.create(&self.id)?;
        store.write_settings(&self.id, &settings)?;
        self.settings = settings;
        Ok(())
    }

    /// Validates a batch against the lifecycle invariants, then appends it.
    pub fn ingest(&mut self, store: &dyn Storage, viewer: &Actor, batch: EventBatch) -> Result<IngestAck, ExpError> {
        if batch.batch_id.is_empty() {
            return Err(ExpError::Schema("batch id is empty".into()));
        }
        if let Some(b) = self.batches.get(&batch.batch_id) {
            return Ok(IngestAck { batch_id: b.batch_id.clone(), offset: b.offset + b.count, accepted: b.count, duplicate: true });
        }
        if let Actor::Participant(me) = viewer {
            if let Some(r) = batch.records.iter().find(|r| r.participant() != me) {
                return Err(forbidden(format!("participant {me} cannot submit records of {}", r.participant())));
            }
        }
        let touched: BTreeSet<_> = batch.records.iter().filter_map(|r| r.as_qa()).map(|e| (&e.participant, e.occurrence)).collect();
        if !touched.is_empty() {
            let mut merged: Vec<LogRecord> = self
                .events
                .iter()
                .filter(|r| r.as_qa().is_some_and(|e| touched.contains(&(&e.participant, e.occurrence))))
                .cloned()
                .collect();
            merged.extend(batch.records.iter().filter(|r| r.as_qa().is_some()).cloned());
            let cycles = lifecycles(&merged).map_err(|e| ExpError::Schema(e.to_string()))?;
            for c in cycles.values() {
                c.check_complete().map_err(|e| ExpError::Schema(e.to_string()))?;
            }
        }
        let known: Option<BTreeSet<&ParticipantId>> =
            self.timeline.as_ref().map(|t| t.participants().collect()).filter(|s: &BTreeSet<_>| !s.is_empty());
        let mut last: HashMap<&ParticipantId, Timestamp> = HashMap::new();
        for (i, r) in batch.records.iter().enumerate() {
            let p = r.participant();
            if known.as_ref().is_some_and(|k| !k.contains(p)) {
                return Err(ExpError::Schema(format!("record {i}: unknown participant {p}")));
            }
            if let Some(prev) = last.insert(p, r.at()) {
                if r.at() < prev {
                    let what = r.as_qa().map_or_else(|| format!("sensor {}", r.as_sensor().map_or("", |s| s.sensor.as_str())), |e| e.occurrence.to_string());
                    return Err(ExpError::Schema(format!("record {i} ({what}): {p} goes back in time from {prev} to {}", r.at())));
                }
            }
        }
        let record = BatchRecord { batch_id: batch.batch_id.clone(), offset: self.offset(), count: batch.records.len() as u64 };
        store.create(&self.id)?;
        store.append_events(&self.id, &record, &batch.records)?;
        self.events.extend(batch.records);
        let ack = IngestAck { batch_id: record.batch_id.clone(), offset: self.offset(), accepted: record.count, duplicate: false };
        self.batches.insert(record.batch_id.clone(), record);
        self.invalidate();
        Ok(ack)
    }

    pub fn revise(&mut self, store: &dyn Storage, viewer: &Actor, rev: Revision) -> Result<RevisionAck, ExpError> {
        let matches = match (viewer, &rev.actor) {
            (Actor::Participant(a), Actor::Participant(b)) => a == b,
            (a, b) => a == b,
        };
        if !matches {
            return Err(ExpError::RoleMismatch { role: viewer.to_string(), actor: rev.actor.to_string() });
        }
        let mut next = self.timeline()?.clone();
        let record = next.apply_revision(rev, &self.settings.policy)?.clone();
        store.append_audit(&self.id, &record)?;
        self.timeline = Some(next);
        self.invalidate();
        Ok(RevisionAck { generation: self.settings.generation, version: self.version(), record })
    }

    pub fn timeline_view(&self, viewer: &Actor, participant: Option<&ParticipantId>) -> Result<TimelineView, ExpError> {
        let t = self.timeline()?;
        let who = scope(viewer, participant)?;
        let mut participants = BTreeMap::new();
        for p in t.participants() {
            if who.as_ref().is_none_or(|w| w == p) {
                participants.insert(p.clone(), t.entries(p).to_vec());
            }
        }
        if let Some(w) = &who {
            if !participants.contains_key(w) {
                return Err(ExpError::NotFound(format!("participant {w}")));
            }
        }
        Ok(TimelineView { generation: self.settings.generation, version: t.version(), participants })
    }

    pub fn summary(&self, viewer: &Actor, subject: Option<&ParticipantId>, now: Option<Timestamp>) -> Result<DashboardSummary, ExpError> {
        if let Actor::Participant(me) = viewer {
            scope(viewer, subject)?;
            if !self.participants.iter().any(|p| &p.id == me) && !self.events.iter().any(|r| r.participant() == me) {
                return Err(ExpError::NotFound(format!("participant {me}")));
            }
        }
        let t = self.timeline()?;
        let view = self.view();
        let now = now.unwrap_or_else(|| self.as_of());
        Ok(dashboard_summary(&view.sorted, t, &self.settings.quality, viewer, subject, now, &self.settings.summary)?)
    }

    pub fn heatmap(
        &self,
        viewer: &Actor,
        subject: Option<&ParticipantId>,
        from: Option<Date>,
        to: Option<Date>,
    ) -> Result<Heatmap, ExpError> {
        if *viewer == Actor::Platform {
            return Err(forbidden("the platform has no heatmap view"));
        }
        let who = scope(viewer, subject)?;
        let view = self.view();
        let span = self.plan.as_ref().and_then(|p| p.window());
        let from = from.or(span.map(|s| s.0.date())).unwrap_or_else(|| self.as_of().date());
        let to = to.or(span.map(|s| (s.1 - ilog_core::time::TimeDelta::from_millis(1)).date())).unwrap_or(from);
        if to < from {
            return Err(ExpError::BadRequest(format!("heatmap range ends ({to}) before it starts ({from})")));
        }
        if (to.days_since_epoch() - from.days_since_epoch()) > 3660 {
            return Err(ExpError::BadRequest("heatmap range is longer than ten years".into()));
        }
        let log: Vec<LogRecord> = match &who {
            Some(me) => view.sorted.iter().filter(|r| r.participant() == me).cloned().collect(),
            None => view.sorted.clone(),
        };
        Ok(compliance_heatmap(&log, from, to))
    }

    pub fn participant_data(&self, viewer: &Actor, pid: &ParticipantId, from: u64, limit: usize) -> Result<ParticipantData, ExpError> {
        if *viewer == Actor::Platform {
            return Err(forbidden("the platform has no participant data view"));
        }
        scope(viewer, Some(pid))?;
        let known = self.participants.iter().any(|p| &p.id == pid) || self.events.iter().any(|r| r.participant() == pid);
        if !known {
            return Err(ExpError::NotFound(format!("participant {pid}")));
        }
        let view = self.view();
        let metrics = participant_metrics(&view.sorted, None).into_iter().find(|m| &m.participant == pid);
        let mut records = Vec::new();
        let mut next = self.offset();
        for (i, r) in self.events.iter().enumerate().skip(from as usize) {
            if r.participant() != pid {
                continue;
            }
            if records.len() == limit {
                next = i as u64;
                break;
            }
            records.push(OffsetRecord { offset: i as u64, record: r.clone() });
        }
        Ok(ParticipantData { participant: pid.clone(), as_of_offset: self.offset(), metrics, records, next_offset: next })
    }

    pub fn compare(&self, viewer: &Actor, pids: &[ParticipantId], now: Option<Timestamp>) -> Result<Vec<ComparisonRow>, ExpError> {
        if *viewer == Actor::Platform {
            return Err(forbidden("the platform has no comparison view"));
        }
        for p in pids {
            scope(viewer, Some(p))?;
        }
        let view = self.view();
        let now = now.unwrap_or_else(|| self.as_of());
        let metrics = participant_metrics(&view.sorted, Some(now));
        let rankings = rank_all(&view.sorted, &self.settings.quality, now);
        Ok(pids
            .iter()
            .map(|p| ComparisonRow {
                participant: p.clone(),
                metrics: metrics.iter().find(|m| &m.participant == p).cloned(),
                ranking: rankings.iter().find(|r| &r.participant == p).cloned(),
            })
            .collect())
    }

    /// Records from `from` on, plus the flags whose newest evidence lies in
    /// the same range, scoped to what `viewer` may see.
    pub fn stream(&self, viewer: &Actor, subject: Option<&ParticipantId>, from: u64) -> Result<StreamPage, ExpError> {
        if from > self.offset() {
            return Err(ExpError::BadRequest(format!("offset {from} is past the end of the log ({})", self.offset())));
        }
        let who = scope(viewer, subject)?;
        let visible = |p: &ParticipantId| who.as_ref().is_none_or(|w| w == p);
        let mut records = Vec::new();
        let mut next = self.offset();
        for (i, r) in self.events.iter().enumerate().skip(from as usize) {
            if records.len() == STREAM_PAGE {
                next = i as u64;
                break;
            }
            if visible(r.participant()) {
                records.push(OffsetRecord { offset: i as u64, record: r.clone() });
            }
        }
        let view = self.view();
        let flags = view
            .flags
            .iter()
            .filter(|f| f.offset >= from && f.offset < next)
            .filter(|f| match (&who, &f.flag.participant) {
                (None, _) => true,
                (Some(w), Some(p)) => w == p,
                (Some(_), None) => false,
            })
            .cloned()
            .collect();
        Ok(StreamPage { from, next_offset: next, records, flags })
    }

    pub fn flags(&self) -> Vec<OffsetFlag> {
        self.view().flags.clone()
    }

    pub fn report(&self, viewer: &Actor, now: Option<Timestamp>, classifier: Option<&ClassifierSpec>) -> Result<Report, ExpError> {
        researcher_only(viewer, "read reports")?;
        let view = self.view();
        let now = now.unwrap_or_else(|| self.as_of());
        let evaluation = match classifier {
            None => None,
            Some(spec) => {
                let mut rows = Vec::new();
                for p in &self.participants {
                    rows.extend(
                        extract_features(&view.sorted, None, p, &TzDatabase).map_err(|e| ExpError::Schema(e.to_string()))?,
                    );
                }
                Some(train_eval(&rows, spec, &Protocol::FiveFoldCv, &EvalOptions::default())?)
            }
        };
        Ok(Report {
            as_of_offset: self.offset(),
            generation: self.settings.generation,
            timeline_version: self.version(),
            now,
            rankings: rank_all(&view.sorted, &self.settings.quality, now),
            flags: view.flags.clone(),
            evaluation,
        })
    }

    pub fn quality(&self) -> &QualityParameters {
        &self.settings.quality
    }

    /// Hash of everything derived state depends on.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.settings.generation.to_le_bytes());
        h.update(self.version().to_le_bytes());
        if let Some(t) = &self.timeline {
            h.update(serde_json::to_vec(t.audit()).expect("audit serializes"));
            for p in t.participants() {
                h.update(p.as_str().as_bytes());
                h.update(serde_json::to_vec(t.entries(p)).expect("entries serialize"));
            }
        }
        h.update(serde_json::to_vec(&self.events).expect("events serialize"));
        hex::encode(h.finalize())
    }
}

/// SHA-256 of any serializable value's JSON form.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("serializable")))
}
