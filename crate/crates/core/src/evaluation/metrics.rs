//! Incremental classification metrics.

use serde::{Deserialize, Serialize};

use crate::models::Proba;
use crate::stream::ClassLabel;

/// Probabilities are floored here before taking the log.
pub const PROBA_FLOOR: f64 = 1e-12;

/// Running truth × prediction counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: ClassLabel, pred: ClassLabel) {
        let n = self.counts.len();
        if truth.index() < n && pred.index() < n {
            self.counts[truth.index()][pred.index()] += 1;
        }
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    fn actual(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.correct(), self.total())
    }

    /// Zero when the class was never predicted.
    pub fn precision(&self, c: usize) -> f64 {
        ratio(self.counts[c][c], self.predicted(c))
    }

    /// Zero when the class never occurred.
    pub fn recall(&self, c: usize) -> f64 {
        ratio(self.counts[c][c], self.actual(c))
    }

    /// Classes that occurred or were predicted.
    fn active(&self) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&c| self.actual(c) + self.predicted(c) > 0)
            .collect()
    }

    /// Mean precision over the classes that occurred or were predicted.
    pub fn precision_macro(&self) -> f64 {
        let active = self.active();
        mean(active.iter().map(|&c| self.precision(c)), active.len())
    }

    pub fn recall_macro(&self) -> f64 {
        let active = self.active();
        mean(active.iter().map(|&c| self.recall(c)), active.len())
    }

    pub fn precision_micro(&self) -> f64 {
        let tp = self.correct();
        let predicted: u64 = (0..self.counts.len()).map(|c| self.predicted(c)).sum();
        ratio(tp, predicted)
    }

    pub fn recall_micro(&self) -> f64 {
        let tp = self.correct();
        let actual: u64 = (0..self.counts.len()).map(|c| self.actual(c)).sum();
        ratio(tp, actual)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// Mean negative log-probability of the true class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossEntropy {
    sum: f64,
    count: u64,
}

impl CrossEntropy {
    pub fn add(&mut self, truth: ClassLabel, proba: &Proba) {
        self.sum -= proba.get(truth).max(PROBA_FLOOR).ln();
        self.count += 1;
    }

    pub fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

pub fn cross_entropy(log: &[(ClassLabel, Proba)]) -> f64 {
    let mut ce = CrossEntropy::default();
    for (t, p) in log {
        ce.add(*t, p);
    }
    ce.value()
}

/// Errors between class indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexError {
    sq: f64,
    abs: f64,
    count: u64,
}

impl IndexError {
    pub fn add(&mut self, truth: ClassLabel, pred: ClassLabel) {
        let d = truth.index() as f64 - pred.index() as f64;
        self.sq += d * d;
        self.abs += d.abs();
        self.count += 1;
    }

    pub fn rmse(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sq / self.count as f64).sqrt()
        }
    }

    pub fn mae(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.abs / self.count as f64
        }
    }
}

pub fn regression_metrics(log: &[(ClassLabel, ClassLabel)]) -> (f64, f64) {
    let mut e = IndexError::default();
    for (t, p) in log {
        e.add(*t, *p);
    }
    (e.rmse(), e.mae())
}

/// Summary of one prequential run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrequentialMetrics {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub precision: Vec<f64>,
    pub recall_macro: f64,
    pub recall: Vec<f64>,
    pub crloss: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Scored samples.
    pub samples: u64,
    pub preq_time_s: Option<f64>,
    pub per_sample_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub confusion: ConfusionMatrix,
    pub crloss: CrossEntropy,
    pub index_error: IndexError,
}

impl MetricsAccumulator {
    pub fn new(n_classes: usize) -> Self {
        Self {
            confusion: ConfusionMatrix::new(n_classes),
            crloss: CrossEntropy::default(),
            index_error: IndexError::default(),
        }
    }

    pub fn add(&mut self, truth: ClassLabel, pred: ClassLabel, proba: &Proba) {
        self.confusion.add(truth, pred);
        self.crloss.add(truth, proba);
        self.index_error.add(truth, pred);
    }

    pub fn summary(&self) -> PrequentialMetrics {
        let n = self.confusion.n_classes();
        PrequentialMetrics {
            accuracy: self.confusion.accuracy(),
            precision_macro: self.confusion.precision_macro(),
            precision: (0..n).map(|c| self.confusion.precision(c)).collect(),
            recall_macro: self.confusion.recall_macro(),
            recall: (0..n).map(|c| self.confusion.recall(c)).collect(),
            crloss: self.crloss.value(),
            rmse: self.index_error.rmse(),
            mae: self.index_error.mae(),
            samples: self.confusion.total(),
            preq_time_s: None,
            per_sample_ms: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(i: u8) -> ClassLabel {
        ClassLabel(i)
    }

    #[test]
    fn perfect_one_hot_run() {
        let mut acc = MetricsAccumulator::new(3);
        for i in 0..100u8 {
            let t = c(i % 3);
            acc.add(t, t, &Proba::one_hot(3, t.index()));
        }
        let m = acc.summary();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.crloss, 0.0);
        assert_eq!((m.rmse, m.mae), (0.0, 0.0));
        assert_eq!(m.precision, vec![1.0; 3]);
    }

    #[test]
    fn single_half_probability() {
        let ce = cross_entropy(&[(c(0), Proba(vec![0.5, 0.5]))]);
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn one_unit_error_in_hundred() {
        let mut log = vec![(c(1), c(1)); 99];
        log.push((c(1), c(2)));
        let (rmse, mae) = regression_metrics(&log);
        assert!((rmse - 0.1).abs() < 1e-12);
        assert!((mae - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_is_floored() {
        let ce = cross_entropy(&[(c(0), Proba(vec![0.0, 1.0]))]);
        assert!((ce + PROBA_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn unpredicted_class_has_zero_precision() {
        let mut m = ConfusionMatrix::new(3);
        m.add(c(0), c(1));
        m.add(c(1), c(1));
        assert_eq!(m.precision(0), 0.0);
        assert_eq!(m.precision(1), 0.5);
        // class 2 neither occurs nor is predicted
        assert!((m.precision_macro() - 0.25).abs() < 1e-12);
        assert!((m.recall_macro() - 0.5).abs() < 1e-12);
    }
}
