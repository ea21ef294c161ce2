use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Single-pass mean / variance accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Sample variance (n − 1 denominator); undefined below two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Variance-threshold selection over a fixed key universe, indexed by position.
#[derive(Debug, Clone)]
pub struct SelectionState {
    accumulators: Vec<Welford>,
    threshold: Option<f64>,
}

impl SelectionState {
    pub fn new(universe: usize) -> Self {
        Self {
            accumulators: vec![Welford::default(); universe],
            threshold: None,
        }
    }

    pub fn observe(&mut self, index: usize, value: f64) {
        self.accumulators[index].update(value);
    }

    pub fn variance(&self, index: usize) -> Option<f64> {
        self.accumulators[index].variance()
    }

    /// Squared threshold once tuning is done.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn is_tuned(&self) -> bool {
        self.threshold.is_some()
    }

    /// Freezes the threshold at the median of the variances defined so far.
    pub fn tune(&mut self) -> Result<f64> {
        if let Some(t) = self.threshold {
            return Ok(t);
        }
        let mut variances: Vec<f64> = self
            .accumulators
            .iter()
            .filter_map(Welford::variance)
            .collect();
        let t = median(&mut variances).ok_or_else(|| {
            Error::Config("no feature was defined during threshold tuning".into())
        })?;
        self.threshold = Some(t);
        Ok(t)
    }

    /// Overrides the threshold, e.g. from configuration.
    pub fn set_threshold(&mut self, t: f64) {
        self.threshold = Some(t.max(0.0));
    }

    /// Strict `variance > threshold`; false before tuning.
    pub fn is_selected(&self, index: usize) -> bool {
        match (self.threshold, self.variance(index)) {
            (Some(t), Some(v)) => v > t,
            _ => false,
        }
    }
}
