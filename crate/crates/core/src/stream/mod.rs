//! Sensor data model and stream sources.

mod address;
pub mod dump;
pub mod pamap2;
pub mod replay;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use address::{Axis, Location, Position, Sensor, SensorAddress};

/// Class symbol `c{index}`; the display name lives in the stream's [`ClassSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassLabel(pub u8);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        s.strip_prefix('c')
            .and_then(|d| d.parse::<u8>().ok())
            .map(ClassLabel)
            .ok_or_else(|| crate::Error::Config(format!("invalid class label `{s}`")))
    }
}

/// Ordered set of class display names; label `ci` is `names[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// correct / cheating / incorrect practice.
    pub fn nordic_practice() -> Self {
        Self::new(["correct", "cheating", "incorrect"])
    }

    pub fn pamap2() -> Self {
        Self::new(["nordic_walking", "climbing_stairs"])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, label: ClassLabel) -> &str {
        self.names
            .get(label.index())
            .map(String::as_str)
            .unwrap_or("unknown")
    }

    pub fn labels(&self) -> impl Iterator<Item = ClassLabel> + '_ {
        (0..self.names.len()).map(|i| ClassLabel(i as u8))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, label: ClassLabel) -> bool {
        label.index() < self.names.len()
    }
}

/// Static description of a stream: its channels, rates and class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamDescriptor {
    pub addresses: Vec<SensorAddress>,
    pub rates: BTreeMap<Sensor, f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub classes: ClassSet,
    pub total_slots: usize,
}

impl StreamDescriptor {
    pub fn new(
        addresses: Vec<SensorAddress>,
        rates: BTreeMap<Sensor, f64>,
        classes: ClassSet,
    ) -> Self {
        let present: Vec<f64> = addresses
            .iter()
            .filter_map(|a| rates.get(&a.sensor).copied())
            .collect();
        let r_min = present.iter().copied().fold(f64::INFINITY, f64::min);
        let r_max = present.iter().copied().fold(0.0, f64::max);
        Self {
            addresses,
            rates,
            r_min,
            r_max,
            classes,
            total_slots: 0,
        }
    }

    /// The master slot clock runs at the fastest sensor rate.
    pub fn master_rate(&self) -> f64 {
        self.r_max
    }

    pub fn address_index(&self, address: &SensorAddress) -> Option<usize> {
        self.addresses.iter().position(|a| a == address)
    }
}

/// One tick of the master clock. `values` is aligned with [`StreamDescriptor::addresses`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSlot {
    pub n: u64,
    pub timestamp: f64,
    pub values: Vec<Option<f64>>,
    pub ground_truth: Option<ClassLabel>,
}

impl RawSlot {
    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    pub fn has_any(&self) -> bool {
        self.values.iter().any(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub descriptor: StreamDescriptor,
    pub slots: Vec<RawSlot>,
}

impl Stream {
    pub fn new(mut descriptor: StreamDescriptor, slots: Vec<RawSlot>) -> Self {
        descriptor.total_slots = slots.len();
        Self { descriptor, slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of slots per ground-truth class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.descriptor.classes.len()];
        for slot in &self.slots {
            if let Some(label) = slot.ground_truth {
                if let Some(c) = counts.get_mut(label.index()) {
                    *c += 1;
                }
            }
        }
        counts
    }
}
