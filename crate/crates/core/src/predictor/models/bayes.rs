use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::predictor::encode::active;
use crate::predictor::Dataset;

/// Gaussian naive Bayes over the 0/1 one-hot indicators. Variances get
/// `var_smoothing` times the largest column variance added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub offsets: Vec<usize>,
    /// Per class (low, high): log prior plus the log density of an all-zero row.
    pub base: [f64; 2],
    /// Per class and column: log density change when the column is 1.
    pub delta: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(data: &Dataset, var_smoothing: f64) -> Self {
        let width = data.width();
        let offsets = data.offsets();
        let mut ones = [alloc::vec![0usize; width], alloc::vec![0usize; width]];
        let mut n = [0usize; 2];
        for (codes, &y) in data.codes.iter().zip(&data.labels) {
            n[y as usize] += 1;
            for j in active(codes, &offsets) {
                ones[y as usize][j] += 1;
            }
        }
        let total = data.len().max(1) as f64;
        let max_var = (0..width)
            .map(|j| {
                let m = (ones[0][j] + ones[1][j]) as f64 / total;
                m * (1.0 - m)
            })
            .fold(0.0, f64::max);
        let eps = var_smoothing * max_var.max(f64::MIN_POSITIVE);
        let ln2pi = libm::log(2.0 * core::f64::consts::PI);
        let mut base = [0.0; 2];
        let mut delta = [alloc::vec![0.0; width], alloc::vec![0.0; width]];
        for c in 0..2 {
            let nc = n[c].max(1) as f64;
            base[c] = libm::log(n[c] as f64 / total);
            for j in 0..width {
                let mean = ones[c][j] as f64 / nc;
                let var = mean * (1.0 - mean) + eps;
                let at0 = -0.5 * (ln2pi + libm::log(var)) - mean * mean / (2.0 * var);
                let at1 = -0.5 * (ln2pi + libm::log(var)) - (1.0 - mean) * (1.0 - mean) / (2.0 * var);
                base[c] += at0;
                delta[c][j] = at1 - at0;
            }
        }
        Self { offsets, base, delta }
    }

    pub fn predict_proba(&self, codes: &[u16]) -> f64 {
        let score = |c: usize| self.base[c] + active(codes, &self.offsets).map(|j| self.delta[c][j]).sum::<f64>();
        let (lo, hi) = (score(0), score(1));
        if hi == f64::NEG_INFINITY {
            return 0.0;
        }
        if lo == f64::NEG_INFINITY {
            return 1.0;
        }
        super::sigmoid(hi - lo)
    }
}
