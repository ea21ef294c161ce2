use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::stream::SensorAddress;
use crate::Error;

/// Per-window statistic, or the raw channel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Raw,
    Q1,
    Q2,
    Q3,
    Avg,
    Std,
    F,
}

impl Metric {
    pub const ENGINEERED: [Metric; 6] = [
        Metric::Q1,
        Metric::Q2,
        Metric::Q3,
        Metric::Avg,
        Metric::Std,
        Metric::F,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Raw => "raw",
            Metric::Q1 => "Q1",
            Metric::Q2 => "Q2",
            Metric::Q3 => "Q3",
            Metric::Avg => "avg",
            Metric::Std => "std",
            Metric::F => "F",
        }
    }

    /// Position in [`Metrics::values`], `None` for the raw value.
    pub fn engineered_index(self) -> Option<usize> {
        (self != Metric::Raw).then(|| self as usize - 1)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Ok(match s {
            "raw" => Metric::Raw,
            "Q1" => Metric::Q1,
            "Q2" => Metric::Q2,
            "Q3" => Metric::Q3,
            "avg" => Metric::Avg,
            "std" => Metric::Std,
            "F" => Metric::F,
            other => return Err(Error::Config(format!("unknown metric `{other}`"))),
        })
    }
}

/// Which of the four calibrated window lengths a feature uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WindowKind {
    Q1,
    Q2,
    Q3,
    Avg,
}

impl WindowKind {
    pub const ALL: [WindowKind; 4] = [
        WindowKind::Q1,
        WindowKind::Q2,
        WindowKind::Q3,
        WindowKind::Avg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::Q1 => "wQ1",
            WindowKind::Q2 => "wQ2",
            WindowKind::Q3 => "wQ3",
            WindowKind::Avg => "wavg",
        }
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Ok(match s {
            "wQ1" => WindowKind::Q1,
            "wQ2" => WindowKind::Q2,
            "wQ3" => WindowKind::Q3,
            "wavg" => WindowKind::Avg,
            other => return Err(Error::Config(format!("unknown window `{other}`"))),
        })
    }
}

/// A feature identifier. String form `{metric}:{window}:{address}`; raw
/// values use `-` for the window, e.g. `raw:-:left-pole-gyroscope-x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureKey {
    pub metric: Metric,
    pub window: Option<WindowKind>,
    pub address: SensorAddress,
}

impl FeatureKey {
    pub fn raw(address: SensorAddress) -> Self {
        Self {
            metric: Metric::Raw,
            window: None,
            address,
        }
    }

    pub fn engineered(metric: Metric, window: WindowKind, address: SensorAddress) -> Self {
        debug_assert!(metric != Metric::Raw);
        Self {
            metric,
            window: Some(window),
            address,
        }
    }

    pub fn is_raw(&self) -> bool {
        self.metric == Metric::Raw
    }

    /// Stable integer identity, used to seed per-key random draws.
    pub fn code(&self) -> u32 {
        let window = self.window.map_or(0, |w| w as u32 + 1);
        (self.metric as u32) << 13 | window << 10 | self.address.code() as u32
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let window = self.window.map_or("-", WindowKind::as_str);
        write!(f, "{}:{}:{}", self.metric.as_str(), window, self.address)
    }
}

impl FromStr for FeatureKey {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let mut parts = s.splitn(3, ':');
        let (Some(m), Some(w), Some(a)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Config(format!("invalid feature key `{s}`")));
        };
        let metric: Metric = m.parse()?;
        let address: SensorAddress = a.parse()?;
        match (metric, w) {
            (Metric::Raw, "-") => Ok(FeatureKey::raw(address)),
            (Metric::Raw, _) | (_, "-") => Err(Error::Config(format!("invalid feature key `{s}`"))),
            (metric, w) => Ok(FeatureKey::engineered(metric, w.parse()?, address)),
        }
    }
}

impl Serialize for FeatureKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
