//! Sliding-window features and online variance selection.
//!
//! After calibration every channel feeds four windows (one per calibrated
//! length). Each full window yields six statistics; together with the raw
//! channel value these form the key universe. A tuning interval sets the
//! variance threshold to the median key variance, after which a key is
//! emitted only while its running variance exceeds the threshold.

mod key;
mod selection;
mod window;

use std::sync::Arc;

use rustfft::Fft;
use serde::{Deserialize, Serialize};

pub use key::{FeatureKey, Metric, WindowKind};
pub use selection::{median, SelectionState, Welford};
pub use window::{compute_metrics, FftPlans, FftScratch, Metrics, WindowState};

use crate::calibration::{calibrate, Calibration, CalibrationConfig, WindowSet};
use crate::stream::{RawSlot, SensorAddress, StreamDescriptor};
use crate::{nint, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Raw,
    Engineered,
}

impl DataKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Raw => "raw",
            DataKind::Engineered => "engineered",
        }
    }
}

impl std::str::FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(DataKind::Raw),
            "engineered" | "eng" => Ok(DataKind::Engineered),
            other => Err(Error::Config(format!("unknown data kind `{other}`"))),
        }
    }
}

/// Selected feature values at one slot, sorted by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub n: u64,
    pub timestamp: f64,
    entries: Vec<(FeatureKey, f64)>,
}

impl FeatureVector {
    /// Builds a vector from arbitrary entries; later duplicates win.
    pub fn new(n: u64, timestamp: f64, mut entries: Vec<(FeatureKey, f64)>) -> Self {
        entries.reverse();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        Self {
            n,
            timestamp,
            entries,
        }
    }

    /// The entries whose key satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(&FeatureKey) -> bool) -> FeatureVector {
        FeatureVector {
            n: self.n,
            timestamp: self.timestamp,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .copied()
                .collect(),
        }
    }

    pub fn get(&self, key: &FeatureKey) -> Option<f64> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(key))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureKey, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &FeatureKey> {
        self.entries.iter().map(|(k, _)| k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keys per channel: the raw value plus six metrics on four windows.
pub const KEYS_PER_CHANNEL: usize = 25;

fn local_index(metric: Metric, window: Option<WindowKind>) -> usize {
    match (metric.engineered_index(), window) {
        (Some(m), Some(w)) => 1 + m * 4 + w as usize,
        _ => 0,
    }
}

/// Incremental feature state for one stream after calibration.
pub struct FeatureEngine {
    addresses: Vec<SensorAddress>,
    windows: WindowSet,
    data: DataKind,
    states: Vec<[WindowState; 4]>,
    plans: [Arc<dyn Fft<f64>>; 4],
    scratch: FftScratch,
    universe: Vec<FeatureKey>,
    order: Vec<usize>,
    values: Vec<Option<f64>>,
    fresh: Vec<bool>,
    selection: SelectionState,
}

impl std::fmt::Debug for FeatureEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureEngine")
            .field("windows", &self.windows)
            .field("data", &self.data)
            .field("universe", &self.universe.len())
            .finish()
    }
}

impl FeatureEngine {
    pub fn new(addresses: Vec<SensorAddress>, windows: WindowSet, data: DataKind) -> Self {
        let lengths = windows.as_array();
        let mut plans = FftPlans::default();
        let plans = lengths.map(|w| plans.get(w));
        let states = addresses
            .iter()
            .map(|_| lengths.map(WindowState::new))
            .collect();
        let mut universe = Vec::with_capacity(addresses.len() * KEYS_PER_CHANNEL);
        for &a in &addresses {
            universe.push(FeatureKey::raw(a));
            for m in Metric::ENGINEERED {
                for w in WindowKind::ALL {
                    universe.push(FeatureKey::engineered(m, w, a));
                }
            }
        }
        let mut order: Vec<usize> = (0..universe.len()).collect();
        order.sort_by_key(|&i| universe[i]);
        let size = universe.len();
        Self {
            addresses,
            windows,
            data,
            states,
            plans,
            scratch: FftScratch::default(),
            universe,
            order,
            values: vec![None; size],
            fresh: vec![false; size],
            selection: SelectionState::new(size),
        }
    }

    pub fn windows(&self) -> WindowSet {
        self.windows
    }

    pub fn data_kind(&self) -> DataKind {
        self.data
    }

    pub fn universe(&self) -> &[FeatureKey] {
        &self.universe
    }

    pub fn index_of(&self, key: &FeatureKey) -> Option<usize> {
        let a = self.addresses.iter().position(|a| *a == key.address)?;
        Some(a * KEYS_PER_CHANNEL + local_index(key.metric, key.window))
    }

    pub fn window_state(&self, address: usize, window: WindowKind) -> &WindowState {
        &self.states[address][window as usize]
    }

    pub fn selection(&self) -> &SelectionState {
        &self.selection
    }

    pub fn selection_mut(&mut self) -> &mut SelectionState {
        &mut self.selection
    }

    /// Running variance of a key, if it has at least two observations.
    pub fn variance(&self, key: &FeatureKey) -> Option<f64> {
        self.index_of(key).and_then(|i| self.selection.variance(i))
    }

    /// Consumes one slot: updates windows, current values and variances.
    ///
    /// A key's variance is observed only when its value is recomputed, i.e.
    /// when its channel is present. Engineered values hold between samples.
    pub fn update(&mut self, slot: &RawSlot) {
        self.fresh.iter_mut().for_each(|f| *f = false);
        for (a, value) in slot.values.iter().enumerate() {
            let base = a * KEYS_PER_CHANNEL;
            self.values[base] = *value;
            let Some(x) = *value else { continue };
            self.fresh[base] = true;
            self.selection.observe(base, x);
            if self.data == DataKind::Raw {
                continue;
            }
            for (wi, state) in self.states[a].iter_mut().enumerate() {
                state.update(Some(x));
                let Some(m) = state.metrics(self.plans[wi].as_ref(), &mut self.scratch) else {
                    continue;
                };
                for (mi, &v) in m.values.iter().enumerate() {
                    let idx = base + 1 + mi * 4 + wi;
                    self.values[idx] = Some(v);
                    self.fresh[idx] = true;
                    self.selection.observe(idx, v);
                }
            }
        }
    }

    /// Every defined key and its current value, in key order.
    pub fn candidates(&self) -> impl Iterator<Item = (FeatureKey, f64)> + '_ {
        self.order
            .iter()
            .filter_map(|&i| self.values[i].map(|v| (self.universe[i], v)))
    }

    /// Whether the key's value was recomputed by the last update.
    pub fn is_fresh(&self, key: &FeatureKey) -> bool {
        self.index_of(key).is_some_and(|i| self.fresh[i])
    }

    /// Defined keys whose variance exceeds `threshold`, in key order.
    pub fn select_with(&self, n: u64, timestamp: f64, threshold: f64) -> FeatureVector {
        let entries = self
            .order
            .iter()
            .filter_map(|&i| {
                let v = self.values[i]?;
                let var = self.selection.variance(i)?;
                (var > threshold).then_some((self.universe[i], v))
            })
            .collect();
        FeatureVector {
            n,
            timestamp,
            entries,
        }
    }

    /// The selected vector under the frozen threshold.
    pub fn vector(&self, n: u64, timestamp: f64) -> Result<FeatureVector> {
        let t = self
            .selection
            .threshold()
            .ok_or_else(|| Error::Config("feature threshold not tuned yet".into()))?;
        Ok(self.select_with(n, timestamp, t))
    }

    /// Selected keys ranked by current variance, highest first.
    pub fn ranked_by_variance(&self) -> Vec<(FeatureKey, f64)> {
        let mut out: Vec<(FeatureKey, f64)> = (0..self.universe.len())
            .filter(|&i| self.values[i].is_some() && self.selection.is_selected(i))
            .filter_map(|i| self.selection.variance(i).map(|v| (self.universe[i], v)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub calibration: CalibrationConfig,
    pub tuning_s: f64,
    pub data: DataKind,
    /// Fixed squared threshold; skips tuning when set.
    pub threshold: Option<f64>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            calibration: CalibrationConfig::default(),
            tuning_s: 60.0,
            data: DataKind::Engineered,
            threshold: None,
        }
    }
}

/// Outcome of feeding one slot to a [`FeaturePipeline`].
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Calibrating,
    Calibrated(Calibration),
    Tuning,
    Tuned(f64),
    Sample(FeatureVector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Calibrating,
    Tuning,
    Running,
}

/// Calibration, threshold tuning and selection for a live stream.
#[derive(Debug)]
pub struct FeaturePipeline {
    descriptor: StreamDescriptor,
    config: FeatureConfig,
    k: usize,
    tuning_slots: usize,
    seen: usize,
    prefix: Vec<RawSlot>,
    calibration: Option<Calibration>,
    engine: Option<FeatureEngine>,
}

impl FeaturePipeline {
    pub fn new(descriptor: StreamDescriptor, config: FeatureConfig) -> Result<Self> {
        let k = config.calibration.slots(descriptor.master_rate())?;
        if !(config.tuning_s >= 0.0) {
            return Err(Error::Config(format!(
                "tuning interval must be ≥ 0 s, got {}",
                config.tuning_s
            )));
        }
        let tuning_slots = nint(config.tuning_s * descriptor.master_rate()).max(1) as usize;
        Ok(Self {
            descriptor,
            config,
            k,
            tuning_slots,
            seen: 0,
            prefix: Vec::with_capacity(k),
            calibration: None,
            engine: None,
        })
    }

    pub fn phase(&self) -> Phase {
        match &self.engine {
            None => Phase::Calibrating,
            Some(e) if !e.selection().is_tuned() => Phase::Tuning,
            Some(_) => Phase::Running,
        }
    }

    pub fn calibration_slots(&self) -> usize {
        self.k
    }

    pub fn tuning_slots(&self) -> usize {
        self.tuning_slots
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.calibration.as_ref()
    }

    pub fn engine(&self) -> Option<&FeatureEngine> {
        self.engine.as_ref()
    }

    pub fn descriptor(&self) -> &StreamDescriptor {
        &self.descriptor
    }

    pub fn threshold(&self) -> Option<f64> {
        self.engine.as_ref().and_then(|e| e.selection().threshold())
    }

    pub fn push(&mut self, slot: &RawSlot) -> Result<Step> {
        self.seen += 1;
        if self.engine.is_none() {
            self.prefix.push(slot.clone());
            if self.seen < self.k {
                return Ok(Step::Calibrating);
            }
            let calibration =
                calibrate(&self.descriptor, &std::mem::take(&mut self.prefix), self.k)?;
            self.engine = Some(FeatureEngine::new(
                self.descriptor.addresses.clone(),
                calibration.windows,
                self.config.data,
            ));
            self.calibration = Some(calibration.clone());
            return Ok(Step::Calibrated(calibration));
        }
        let engine = self.engine.as_mut().unwrap();
        engine.update(slot);
        if !engine.selection().is_tuned() {
            if let Some(t) = self.config.threshold {
                engine.selection_mut().set_threshold(t);
            } else if self.seen < self.k + self.tuning_slots {
                return Ok(Step::Tuning);
            } else {
                let t = engine.selection_mut().tune()?;
                return Ok(Step::Tuned(t));
            }
        }
        Ok(Step::Sample(engine.vector(slot.n, slot.timestamp)?))
    }

    /// Errors if the stream ended before calibration or tuning completed.
    pub fn finish(&self) -> Result<()> {
        match self.phase() {
            Phase::Calibrating => Err(Error::Calibration(format!(
                "stream ended after {} slots, calibration needs {}",
                self.seen, self.k
            ))),
            Phase::Tuning => Err(Error::Config(format!(
                "stream ended during threshold tuning after {} slots",
                self.seen
            ))),
            Phase::Running => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::synthetic::{generate_synthetic, SyntheticConfig};
    use crate::stream::ClassLabel;

    #[test]
    fn feature_vector_lookup() {
        let a = SensorAddress::nordic_set()[0];
        let k1 = FeatureKey::raw(a);
        let k2 = FeatureKey::engineered(Metric::F, WindowKind::Avg, a);
        let fv = FeatureVector::new(3, 0.1, vec![(k2, 2.0), (k1, 1.0), (k1, 5.0)]);
        assert_eq!(fv.len(), 2);
        assert_eq!(fv.get(&k1), Some(5.0));
        assert_eq!(fv.get(&k2), Some(2.0));
        assert_eq!(fv.keys().next(), Some(&k1));
    }

    #[test]
    fn pipeline_phases() {
        let stream =
            generate_synthetic(&SyntheticConfig::new(2, vec![(ClassLabel(0), 20.0)])).unwrap();
        let config = FeatureConfig {
            calibration: CalibrationConfig { duration_s: 8.0 },
            tuning_s: 4.0,
            ..FeatureConfig::default()
        };
        let mut p = FeaturePipeline::new(stream.descriptor.clone(), config).unwrap();
        let mut samples = 0;
        let mut tuned_at = None;
        for (i, slot) in stream.slots.iter().enumerate() {
            match p.push(slot).unwrap() {
                Step::Calibrated(c) => {
                    assert_eq!(i + 1, 200);
                    assert!(c.spacings.len() >= 4);
                }
                Step::Tuned(_) => tuned_at = Some(i + 1),
                Step::Sample(fv) => {
                    samples += 1;
                    assert_eq!(fv.n, slot.n);
                }
                _ => {}
            }
        }
        assert_eq!(tuned_at, Some(300));
        assert_eq!(samples, 200);
        assert_eq!(p.phase(), Phase::Running);
        p.finish().unwrap();
    }

    #[test]
    fn short_stream_fails_calibration() {
        let stream =
            generate_synthetic(&SyntheticConfig::new(2, vec![(ClassLabel(0), 2.0)])).unwrap();
        let mut p =
            FeaturePipeline::new(stream.descriptor.clone(), FeatureConfig::default()).unwrap();
        for slot in &stream.slots {
            assert_eq!(p.push(slot).unwrap(), Step::Calibrating);
        }
        assert!(matches!(p.finish(), Err(Error::Calibration(_))));
    }
}
