//! Logistic regression (batch gradient descent, L2) and a linear SVM
//! (stochastic subgradient on the hinge loss).

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::predictor::encode::active;
use crate::predictor::Dataset;
use crate::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearLoss {
    Logistic,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub loss: LinearLoss,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub offsets: Vec<usize>,
}

impl Linear {
    fn margin(&self, codes: &[u16]) -> f64 {
        self.bias + active(codes, &self.offsets).map(|j| self.weights[j]).sum::<f64>()
    }

    /// For the SVM this is the logistic squash of the margin, good for
    /// ranking but not calibrated.
    pub fn predict_proba(&self, codes: &[u16]) -> f64 {
        sigmoid(self.margin(codes))
    }

    pub fn fit_logistic(data: &Dataset, p: LinearParams) -> Self {
        let offsets = data.offsets();
        let mut m = Linear { loss: LinearLoss::Logistic, weights: alloc::vec![0.0; data.width()], bias: 0.0, offsets };
        let n = data.len() as f64;
        let mut grad = alloc::vec![0.0; m.weights.len()];
        for _ in 0..p.epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (codes, &y) in data.codes.iter().zip(&data.labels) {
                let err = sigmoid(m.margin(codes)) - y as u8 as f64;
                gb += err;
                for j in active(codes, &m.offsets) {
                    grad[j] += err;
                }
            }
            for (w, g) in m.weights.iter_mut().zip(&grad) {
                *w -= p.learning_rate * (g / n + p.l2 * *w);
            }
            m.bias -= p.learning_rate * gb / n;
        }
        m
    }

    /// Pegasos with a constant feature standing in for the bias.
    pub fn fit_svm(data: &Dataset, p: LinearParams, seed: u64) -> Self {
        let offsets = data.offsets();
        let width = data.width();
        // v scaled by s; last slot is the constant feature
        let mut v = alloc::vec![0.0; width + 1];
        let mut s = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[b"svm", &seed.to_le_bytes()]));
        let n = data.len();
        let lambda = p.l2;
        for t in 1..=(p.epochs * n) {
            let i = rng.random_range(0..n);
            let codes = &data.codes[i];
            let y = if data.labels[i] { 1.0 } else { -1.0 };
            let dot = s * (v[width] + active(codes, &offsets).map(|j| v[j]).sum::<f64>());
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                s = 1.0;
            } else {
                s *= shrink;
            }
            if y * dot < 1.0 {
                let step = eta * y / s;
                v[width] += step;
                for j in active(codes, &offsets) {
                    v[j] += step;
                }
            }
            if s < 1e-200 {
                v.iter_mut().for_each(|x| *x *= s);
                s = 1.0;
            }
        }
        Linear {
            loss: LinearLoss::Hinge,
            weights: v[..width].iter().map(|x| x * s).collect(),
            bias: v[width] * s,
            offsets,
        }
    }
}
