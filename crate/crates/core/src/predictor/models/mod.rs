//! Native classifiers over one-hot encoded rows.

pub mod bayes;
pub mod forest;
pub mod knn;
pub mod linear;

use serde::{Deserialize, Serialize};

pub use bayes::GaussianNb;
pub use forest::{Forest, ForestParams};
pub use knn::Knn;
pub use linear::{Linear, LinearLoss, LinearParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    RandomForest(Forest),
    KNearestNeighbors(Knn),
    LogisticRegression(Linear),
    GaussianNaiveBayes(GaussianNb),
    LinearSvm(Linear),
}

impl TrainedModel {
    /// Estimated probability that the answer is high quality.
    pub fn predict_proba(&self, codes: &[u16]) -> f64 {
        match self {
            TrainedModel::RandomForest(m) => m.predict_proba(codes),
            TrainedModel::KNearestNeighbors(m) => m.predict_proba(codes),
            TrainedModel::LogisticRegression(m) | TrainedModel::LinearSvm(m) => m.predict_proba(codes),
            TrainedModel::GaussianNaiveBayes(m) => m.predict_proba(codes),
        }
    }

    pub fn predict(&self, codes: &[u16]) -> bool {
        self.predict_proba(codes) >= 0.5
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}
