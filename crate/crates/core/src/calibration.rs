//! Window-length calibration from minima spacing.
//!
//! Each channel's spacing `v` is the distance between its first two strict
//! local minima over present samples in the calibration prefix. The four
//! global window lengths follow from the ordered spacings, scaled by the
//! rate multiplier `m = nint(2 r_max / r_min)`.

use serde::{Deserialize, Serialize};

use crate::stream::{RawSlot, SensorAddress, StreamDescriptor};
use crate::{nint, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub duration_s: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { duration_s: 90.0 }
    }
}

impl CalibrationConfig {
    /// Calibration length in master slots.
    pub fn slots(&self, master_rate: f64) -> Result<usize> {
        let k = nint(self.duration_s * master_rate);
        if k < 3 {
            return Err(Error::Config(format!(
                "calibration needs at least 3 slots, {} s at {master_rate} Hz gives {k}",
                self.duration_s
            )));
        }
        Ok(k as usize)
    }
}

/// The four window lengths, in master slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSet {
    pub w_q1: usize,
    pub w_q2: usize,
    pub w_q3: usize,
    pub w_avg: usize,
}

impl WindowSet {
    pub fn as_array(&self) -> [usize; 4] {
        [self.w_q1, self.w_q2, self.w_q3, self.w_avg]
    }

    /// Warm-up horizon: no window can be full before this many present values.
    pub fn n_init(&self) -> usize {
        self.as_array().into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimaSpacing {
    pub address: SensorAddress,
    pub v: usize,
}

/// Distance between the first two strict interior minima of `signal`.
/// Returns `None` when fewer than two exist.
pub fn find_minima_spacing(signal: &[f64]) -> Option<usize> {
    let mut minima = (1..signal.len().saturating_sub(1))
        .filter(|&n| signal[n - 1] > signal[n] && signal[n] < signal[n + 1]);
    let v1 = minima.next()?;
    let v2 = minima.next()?;
    Some(v2 - v1)
}

/// Window lengths from per-channel spacings.
pub fn derive_windows(spacings: &[usize], r_min: f64, r_max: f64) -> Result<WindowSet> {
    if spacings.len() < 4 {
        return Err(Error::Calibration(format!(
            "need spacings from at least 4 channels, got {}",
            spacings.len()
        )));
    }
    if !(r_min > 0.0 && r_min <= r_max) {
        return Err(Error::Config(format!(
            "invalid rates r_min={r_min}, r_max={r_max}"
        )));
    }
    let mut sorted = spacings.to_vec();
    sorted.sort_unstable();
    let len = sorted.len();
    let m = nint(2.0 * r_max / r_min) as usize;
    let quartile = |j: usize| {
        let idx = (nint((j * len) as f64 / 4.0) as usize).min(len - 1);
        m * sorted[idx]
    };
    let mean = sorted.iter().sum::<usize>() as f64 / len as f64;
    Ok(WindowSet {
        w_q1: quartile(1),
        w_q2: quartile(2),
        w_q3: quartile(3),
        w_avg: m * nint(mean) as usize,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Calibration length in master slots.
    pub k: usize,
    pub spacings: Vec<MinimaSpacing>,
    /// Channels without two minima in the prefix, with the reason.
    pub excluded: Vec<(SensorAddress, String)>,
    pub windows: WindowSet,
}

/// Calibrates from the first `k` slots (or fewer if the stream is shorter).
pub fn calibrate(
    descriptor: &StreamDescriptor,
    slots: &[RawSlot],
    k: usize,
) -> Result<Calibration> {
    let prefix = &slots[..k.min(slots.len())];
    let mut spacings = Vec::new();
    let mut excluded = Vec::new();
    for (i, &address) in descriptor.addresses.iter().enumerate() {
        let signal: Vec<f64> = prefix.iter().filter_map(|s| s.values[i]).collect();
        match find_minima_spacing(&signal) {
            Some(v) => spacings.push(MinimaSpacing { address, v }),
            None => excluded.push((
                address,
                format!("fewer than two local minima in {} samples", signal.len()),
            )),
        }
    }
    if spacings.len() < 4 {
        let detail = excluded
            .iter()
            .map(|(a, r)| format!("{a}: {r}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Calibration(format!(
            "only {} channels calibrated, need 4 ({detail})",
            spacings.len()
        )));
    }
    let values: Vec<usize> = spacings.iter().map(|s| s.v).collect();
    let windows = derive_windows(&values, descriptor.r_min, descriptor.r_max)?;
    Ok(Calibration {
        k,
        spacings,
        excluded,
        windows,
    })
}

/// Per-channel error for a single channel, for callers that calibrate one signal.
pub fn channel_spacing(address: &SensorAddress, signal: &[f64]) -> Result<MinimaSpacing> {
    find_minima_spacing(signal)
        .map(|v| MinimaSpacing {
            address: *address,
            v,
        })
        .ok_or_else(|| Error::calibration_channel(address, "fewer than two strict local minima"))
}
