//! Classifier specs, training and the two evaluation protocols.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::models::{Forest, ForestParams, GaussianNb, Knn, Linear, LinearParams, TrainedModel};
use super::{Confusion, Dataset, Encoder, EncoderOptions, FeatureVector, LabelKind, Metrics};
use crate::context::ParticipantId;
use crate::stable_hash;
use crate::time::{TimeDelta, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    RandomForest,
    KNearestNeighbors,
    LogisticRegression,
    GaussianNaiveBayes,
    LinearSvm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::RandomForest,
        ClassifierKind::KNearestNeighbors,
        ClassifierKind::LogisticRegression,
        ClassifierKind::GaussianNaiveBayes,
        ClassifierKind::LinearSvm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::RandomForest => "random-forest",
            ClassifierKind::KNearestNeighbors => "knn",
            ClassifierKind::LogisticRegression => "logistic-regression",
            ClassifierKind::GaussianNaiveBayes => "gaussian-nb",
            ClassifierKind::LinearSvm => "linear-svm",
        }
    }

    /// Accepted hyperparameters and their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            ClassifierKind::RandomForest => &[("trees", 100.0), ("max_depth", 12.0), ("mtry", 0.0), ("min_samples_split", 2.0)],
            ClassifierKind::KNearestNeighbors => &[("k", 5.0)],
            ClassifierKind::LogisticRegression => &[("learning_rate", 0.5), ("epochs", 300.0), ("l2", 1e-4)],
            ClassifierKind::GaussianNaiveBayes => &[("var_smoothing", 1e-9)],
            ClassifierKind::LinearSvm => &[("lambda", 1e-4), ("epochs", 10.0)],
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = TrainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        let alias = match s.as_str() {
            "rf" => "random-forest",
            "lr" | "logistic" => "logistic-regression",
            "gnb" | "naive-bayes" => "gaussian-nb",
            "svm" => "linear-svm",
            other => other,
        };
        ClassifierKind::ALL.into_iter().find(|k| k.as_str() == alias).ok_or(TrainError::UnknownClassifier(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        Self { kind, hyperparameters: BTreeMap::new(), seed }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyperparameters.insert(name.into(), value);
        self
    }

    pub fn check(&self) -> Result<(), TrainError> {
        let known = self.kind.defaults();
        for (name, &v) in &self.hyperparameters {
            if !known.iter().any(|(k, _)| k == name) {
                return Err(TrainError::Hyperparameter(name.clone()));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(TrainError::Hyperparameter(name.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> f64 {
        self.hyperparameters
            .get(name)
            .copied()
            .or_else(|| self.kind.defaults().iter().find(|(k, _)| *k == name).map(|(_, v)| *v))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum TrainError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("unknown or invalid hyperparameter {0:?}")]
    Hyperparameter(String),
    #[error("unknown classifier {0:?}")]
    UnknownClassifier(String),
}

/// Fits one model. Needs both classes in `data`.
pub fn train(data: &Dataset, spec: &ClassifierSpec) -> Result<TrainedModel, TrainError> {
    spec.check()?;
    let pos = data.positives();
    if pos == 0 || pos == data.len() {
        return Err(TrainError::DegenerateData(alloc::format!(
            "training set of {} rows has a single class",
            data.len()
        )));
    }
    let usize_of = |name| spec.get(name) as usize;
    Ok(match spec.kind {
        ClassifierKind::RandomForest => TrainedModel::RandomForest(Forest::fit(
            data,
            ForestParams {
                trees: usize_of("trees"),
                max_depth: usize_of("max_depth"),
                mtry: usize_of("mtry"),
                min_samples_split: usize_of("min_samples_split"),
            },
            spec.seed,
        )),
        ClassifierKind::KNearestNeighbors => TrainedModel::KNearestNeighbors(Knn::fit(data, usize_of("k"))),
        ClassifierKind::LogisticRegression => TrainedModel::LogisticRegression(Linear::fit_logistic(
            data,
            LinearParams { learning_rate: spec.get("learning_rate"), epochs: usize_of("epochs"), l2: spec.get("l2") },
        )),
        ClassifierKind::GaussianNaiveBayes => TrainedModel::GaussianNaiveBayes(GaussianNb::fit(data, spec.get("var_smoothing"))),
        ClassifierKind::LinearSvm => {
            let lambda = spec.get("lambda");
            if lambda <= 0.0 {
                return Err(TrainError::Hyperparameter("lambda".into()));
            }
            TrainedModel::LinearSvm(Linear::fit_svm(
                data,
                LinearParams { learning_rate: 0.0, epochs: usize_of("epochs").max(1), l2: lambda },
                spec.seed,
            ))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// Five folds; each trains on the other four (80%) and tests on itself.
    FiveFoldCv,
    /// One participant: train before `split_at`, test from it on.
    PerParticipantSplit { participant: ParticipantId, split_at: Timestamp },
}

impl Protocol {
    /// Weeks one and two train, the rest tests.
    pub fn two_week_split(participant: ParticipantId, experiment_start: Timestamp) -> Self {
        Protocol::PerParticipantSplit { participant, split_at: experiment_start + TimeDelta::from_days(14) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

/// `confusion` pools every test prediction and `metrics` derives from it;
/// `mean_over_folds` averages the per-fold metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: ClassifierKind,
    pub seed: u64,
    pub protocol: Protocol,
    pub fold_count: usize,
    pub rows: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub mean_over_folds: Metrics,
    pub folds: Vec<FoldResult>,
}

/// Fold of every key: keys are ranked by a seeded hash and dealt round-robin,
/// so folds differ in size by at most one and do not depend on row order.
pub fn assign_folds(keys: &[String], k: usize, seed: u64) -> Vec<usize> {
    let k = k.max(1);
    let seed = seed.to_le_bytes();
    let mut order: Vec<(u64, &str, usize)> =
        keys.iter().enumerate().map(|(i, key)| (stable_hash(&[b"fold", &seed, key.as_bytes()]), key.as_str(), i)).collect();
    order.sort_unstable();
    let mut folds = alloc::vec![0; keys.len()];
    for (rank, &(_, _, i)) in order.iter().enumerate() {
        folds[i] = rank % k;
    }
    folds
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub encoder: EncoderOptions,
    pub label: LabelKind,
}

/// Encodes `features` and evaluates under `protocol`.
pub fn train_eval(
    features: &[FeatureVector],
    spec: &ClassifierSpec,
    protocol: &Protocol,
    options: &EvalOptions,
) -> Result<EvalReport, TrainError> {
    let encoder = Encoder::fit(features, options.encoder);
    evaluate(&encoder.dataset(features, options.label), spec, protocol)
}

fn run_fold(data: &Dataset, train_idx: &[usize], test_idx: &[usize], spec: &ClassifierSpec, fold: usize) -> Result<FoldResult, TrainError> {
    if test_idx.is_empty() {
        return Err(TrainError::DegenerateData(alloc::format!("fold {fold} has no test rows")));
    }
    let model = train(&data.subset(train_idx), spec)?;
    let mut confusion = Confusion::default();
    for &i in test_idx {
        confusion.record(data.labels[i], model.predict(&data.codes[i]));
    }
    Ok(FoldResult { fold, train_size: train_idx.len(), test_size: test_idx.len(), confusion, metrics: confusion.metrics() })
}

/// Evaluates an encoded dataset. Rows are put in key order first so the
/// report does not depend on input order.
pub fn evaluate(data: &Dataset, spec: &ClassifierSpec, protocol: &Protocol) -> Result<EvalReport, TrainError> {
    spec.check()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.keys[a].cmp(&data.keys[b]));
    let data = data.subset(&order);
    let folds = match protocol {
        Protocol::FiveFoldCv => {
            let assignment = assign_folds(&data.keys, 5, spec.seed);
            (0..5)
                .map(|f| {
                    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == f);
                    run_fold(&data, &train, &test, spec, f)
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        Protocol::PerParticipantSplit { participant, split_at } => {
            let mine = (0..data.len()).filter(|&i| &data.participants[i] == participant);
            let (train, test): (Vec<usize>, Vec<usize>) = mine.partition(|&i| data.delivered_at[i] < *split_at);
            alloc::vec![run_fold(&data, &train, &test, spec, 0)?]
        }
    };
    let mut confusion = Confusion::default();
    folds.iter().for_each(|f| confusion.merge(&f.confusion));
    let per: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    Ok(EvalReport {
        classifier: spec.kind,
        seed: spec.seed,
        protocol: protocol.clone(),
        fold_count: folds.len(),
        rows: confusion.total() as usize,
        confusion,
        metrics: confusion.metrics(),
        mean_over_folds: Metrics::mean(&per),
        folds,
    })
}
