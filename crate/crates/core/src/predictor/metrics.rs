use serde::{Deserialize, Serialize};

/// Binary confusion matrix with "high quality" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_pairs(actual: &[bool], predicted: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            c.record(a, p);
        }
        c
    }

    pub fn record(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Rows are actual (high, low), columns predicted (high, low).
    pub fn matrix(&self) -> [[u64; 2]; 2] {
        [[self.tp, self.fn_], [self.fp, self.tn]]
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn metrics(&self) -> Metrics {
        let n = self.total() as f64;
        if n == 0.0 {
            return Metrics::default();
        }
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let accuracy = (tp + tn) / n;
        let pe = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
        let kappa = if pe < 1.0 { (accuracy - pe) / (1.0 - pe) } else { 0.0 };
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Metrics { accuracy, kappa, precision, recall, f1 }
    }
}

/// Undefined ratios (empty denominators) are reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub kappa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn mean(all: &[Metrics]) -> Metrics {
        if all.is_empty() {
            return Metrics::default();
        }
        let n = all.len() as f64;
        let sum = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Metrics {
            accuracy: sum(|m| m.accuracy),
            kappa: sum(|m| m.kappa),
            precision: sum(|m| m.precision),
            recall: sum(|m| m.recall),
            f1: sum(|m| m.f1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_ten_ten_forty() {
        let m = Confusion { tp: 40, fn_: 10, fp: 10, tn: 40 }.metrics();
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.kappa - 0.6).abs() < 1e-12);
        assert!((m.precision - 0.8).abs() < 1e-12 && (m.recall - 0.8).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominators() {
        let m = Confusion { tp: 0, fp: 0, fn_: 0, tn: 10 }.metrics();
        assert_eq!((m.accuracy, m.kappa, m.precision, m.recall, m.f1), (1.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(Confusion::default().metrics(), Metrics::default());
    }
}
