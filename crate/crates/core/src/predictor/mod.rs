//! Answer-quality prediction: features from the event log, the 30-minute
//! label, five native classifiers, evaluation protocols and schedule
//! recommendations.

pub mod encode;
pub mod eval;
pub mod metrics;
pub mod models;
pub mod recommend;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::{LifeSequence, ParticipantId, ParticipantProfile};
use crate::plan::QCategory;
use crate::schedule::OccurrenceRef;
use crate::sim::{lifecycles_lossy, truth_label, LogRecord, TimingMetrics};
use crate::time::{DayPeriod, TimeDelta, TimeError, Timestamp, ZoneDb};

pub use encode::{Dataset, Encoder, EncoderOptions, LabelKind, UNKNOWN};
pub use eval::{
    assign_folds, evaluate, train, train_eval, ClassifierKind, ClassifierSpec, EvalOptions, EvalReport, FoldResult,
    Protocol, TrainError,
};
pub use metrics::{Confusion, Metrics};
pub use models::TrainedModel;
pub use recommend::{apply_recommendation, recommend_windows, ProposalOutcome, WindowRecommendation, NO_PREFERENCE_SPREAD};

/// Answers stored within this long after delivery are high quality.
pub const QUALITY_WINDOW: TimeDelta = TimeDelta::from_minutes(30);

/// High iff the answer was stored no later than 30 minutes after delivery.
pub fn label_quality(timing: &TimingMetrics) -> bool {
    match (timing.reaction_time, timing.completion_time) {
        (Some(r), Some(c)) => r + c <= QUALITY_WINDOW,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub participant: ParticipantId,
    pub occurrence: OccurrenceRef,
    pub delivered_at: Timestamp,
    /// 1 = Monday … 7 = Sunday, local to the participant.
    pub weekday: u8,
    pub day_period: DayPeriod,
    pub we: String,
    pub wa: String,
    pub wo: String,
    pub wi: String,
    pub gender: String,
    pub degree: String,
    pub department: String,
    /// High quality under the 30-minute rule.
    pub label: bool,
    /// Answer matched ground truth; `None` when unanswered or no truth given.
    pub correct: Option<bool>,
}

/// One vector per delivered question of `profile`. Context features are the
/// latest answers stored at or before the delivery instant.
pub fn extract_features(
    log: &[LogRecord],
    ground: Option<&LifeSequence>,
    profile: &ParticipantProfile,
    zones: &dyn ZoneDb,
) -> Result<Vec<FeatureVector>, TimeError> {
    let cycles = lifecycles_lossy(log);
    let mine: Vec<_> = cycles.values().filter(|c| c.participant == profile.id).collect();
    let mut answers: BTreeMap<QCategory, Vec<(Timestamp, &str)>> = BTreeMap::new();
    for c in &mine {
        if let (Some(at), Some(a)) = (c.stored, c.answer.as_deref()) {
            answers.entry(c.category).or_default().push((at, a));
        }
    }
    for v in answers.values_mut() {
        v.sort_unstable();
    }
    let latest = |cat: QCategory, at: Timestamp| -> String {
        answers
            .get(&cat)
            .and_then(|v| v[..v.partition_point(|x| x.0 <= at)].last())
            .map_or_else(|| String::from(UNKNOWN), |x| String::from(x.1))
    };
    let mut out = Vec::with_capacity(mine.len());
    for c in mine {
        let Some(delivered) = c.delivered else { continue };
        let local = zones.to_local(&profile.timezone, delivered)?;
        let timing = c.timing().unwrap_or_default();
        let correct = match (ground.and_then(|g| g.context_at(delivered)), c.answer.as_deref()) {
            (Some(ctx), Some(a)) => Some(truth_label(ctx, c.category) == Some(a)),
            _ => None,
        };
        out.push(FeatureVector {
            participant: profile.id.clone(),
            occurrence: c.occurrence,
            delivered_at: delivered,
            weekday: local.date().weekday(),
            day_period: DayPeriod::of(local),
            we: latest(QCategory::WE, delivered),
            wa: latest(QCategory::WA, delivered),
            wo: latest(QCategory::WO, delivered),
            wi: latest(QCategory::WI, delivered),
            gender: profile.gender.clone(),
            degree: profile.degree.clone(),
            department: profile.department.clone(),
            label: label_quality(&timing),
            correct,
        });
    }
    out.sort_by(|a, b| (a.delivered_at, a.occurrence).cmp(&(b.delivered_at, b.occurrence)));
    Ok(out)
}

/// Row identity used for fold assignment.
pub fn row_key(f: &FeatureVector) -> String {
    alloc::format!("{}/{}", f.participant, f.occurrence)
}
