use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::predictor::Dataset;

/// k nearest neighbours under Hamming distance on the one-hot encoding.
/// Every training row tied with the k-th distance votes too, so the answer
/// does not depend on row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub codes: Vec<Vec<u16>>,
    pub labels: Vec<bool>,
}

impl Knn {
    pub fn fit(data: &Dataset, k: usize) -> Self {
        Self { k: k.max(1), codes: data.codes.clone(), labels: data.labels.clone() }
    }

    pub fn predict_proba(&self, codes: &[u16]) -> f64 {
        // one-hot Hamming distance is twice the number of differing fields
        let mut hist = alloc::vec![(0usize, 0usize); codes.len() + 1];
        for (row, &y) in self.codes.iter().zip(&self.labels) {
            let d = row.iter().zip(codes).filter(|(a, b)| a != b).count();
            hist[d].0 += 1;
            hist[d].1 += y as usize;
        }
        let (mut n, mut pos) = (0, 0);
        for (count, p) in hist {
            n += count;
            pos += p;
            if n >= self.k {
                break;
            }
        }
        if n == 0 {
            0.5
        } else {
            pos as f64 / n as f64
        }
    }
}
