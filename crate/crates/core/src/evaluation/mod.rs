//! Prequential evaluation over scenarios A–D and result tables.

mod metrics;
mod prequential;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use metrics::{
    cross_entropy, regression_metrics, ConfusionMatrix, CrossEntropy, IndexError,
    MetricsAccumulator, PrequentialMetrics, PROBA_FLOOR,
};
pub use prequential::{
    block_order, run_prequential, simulated_judge, LogRecord, Op, RunOptions, RunOutcome,
    UnsupervisedOutcome,
};
pub use report::{
    aggregate, render_table, write_csv, write_prediction_log, AggregateRow, ReportRow,
};

use crate::features::DataKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    /// Supervised, temporal order.
    A,
    /// Supervised, shuffled blocks.
    B,
    /// Supervised, shuffled blocks, sparse training.
    C,
    /// Clustering, judge tags and the explainer forest.
    D,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ScenarioId::A),
            "B" | "b" => Ok(ScenarioId::B),
            "C" | "c" => Ok(ScenarioId::C),
            "D" | "d" => Ok(ScenarioId::D),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}` (expected A, B, C or D)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Synthetic,
    Pamap2,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Synthetic => "synthetic",
            Dataset::Pamap2 => "pamap2",
        }
    }

    /// Learning stride of the temporal and shuffled scenarios.
    pub fn base_stride(self) -> usize {
        match self {
            Dataset::Synthetic => 10,
            Dataset::Pamap2 => 30,
        }
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Dataset::Synthetic),
            "pamap2" => Ok(Dataset::Pamap2),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected synthetic or pamap2)"
            ))),
        }
    }
}

pub const SUPERVISED_MODELS: [&str; 3] = ["gnb", "hatc", "arfc"];
pub const SHUFFLE_BLOCKS: usize = 8;
pub const SPARSE_STRIDE: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub data: DataKind,
    pub model: String,
    /// Every `stride`-th sample is predicted, scored and learned.
    pub stride: usize,
    /// Shuffle blocks; 0 keeps temporal order.
    pub partitions: usize,
}

impl ScenarioSpec {
    /// Default stride and partitions for the scenario on `dataset`.
    pub fn new(id: ScenarioId, data: DataKind, model: &str, dataset: Dataset) -> Result<Self> {
        let (stride, partitions) = match id {
            ScenarioId::A | ScenarioId::D => (dataset.base_stride(), 0),
            ScenarioId::B => (dataset.base_stride(), SHUFFLE_BLOCKS),
            ScenarioId::C => (SPARSE_STRIDE, SHUFFLE_BLOCKS),
        };
        let spec = Self {
            id,
            data,
            model: model.to_string(),
            stride,
            partitions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.stride = stride;
        self.validate()?;
        Ok(self)
    }

    /// Collects every problem into one message.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.stride == 0 {
            problems.push("stride must be at least 1".to_string());
        }
        match self.id {
            ScenarioId::D => {
                if self.data != DataKind::Engineered {
                    problems.push("scenario D runs on engineered data only".to_string());
                }
                if self.model != "kmeans" {
                    problems.push(format!(
                        "scenario D uses the kmeans model, not `{}`",
                        self.model
                    ));
                }
                if self.partitions != 0 {
                    problems.push("scenario D keeps temporal order".to_string());
                }
            }
            _ => {
                if self.model == "kmeans" {
                    problems.push(format!(
                        "kmeans is a clusterer; scenario {} needs a classifier",
                        self.id
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Both data kinds × scenarios A–C × supervised models, then scenario D.
    pub fn grid(dataset: Dataset) -> Vec<ScenarioSpec> {
        let mut out = Vec::new();
        for data in [DataKind::Raw, DataKind::Engineered] {
            for id in [ScenarioId::A, ScenarioId::B, ScenarioId::C] {
                for model in SUPERVISED_MODELS {
                    out.push(
                        ScenarioSpec::new(id, data, model, dataset)
                            .expect("grid entries are valid"),
                    );
                }
            }
        }
        out.push(
            ScenarioSpec::new(ScenarioId::D, DataKind::Engineered, "kmeans", dataset)
                .expect("valid"),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_nineteen_rows() {
        let grid = ScenarioSpec::grid(Dataset::Synthetic);
        assert_eq!(grid.len(), 19);
        for data in [DataKind::Raw, DataKind::Engineered] {
            let rows = grid
                .iter()
                .filter(|s| s.data == data && s.id != ScenarioId::D)
                .count();
            assert_eq!(rows, 9);
        }
    }

    #[test]
    fn default_strides() {
        let s = |id, ds| {
            ScenarioSpec::new(id, DataKind::Engineered, "gnb", ds)
                .unwrap()
                .stride
        };
        assert_eq!(s(ScenarioId::A, Dataset::Synthetic), 10);
        assert_eq!(s(ScenarioId::B, Dataset::Pamap2), 30);
        assert_eq!(s(ScenarioId::C, Dataset::Synthetic), 100);
    }

    #[test]
    fn invalid_combinations_are_aggregated() {
        let err = ScenarioSpec {
            id: ScenarioId::D,
            data: DataKind::Raw,
            model: "gnb".into(),
            stride: 0,
            partitions: 0,
        }
        .validate()
        .unwrap_err()
        .to_string();
        assert!(
            err.contains("stride") && err.contains("engineered") && err.contains("kmeans"),
            "{err}"
        );
        assert!(
            ScenarioSpec::new(ScenarioId::A, DataKind::Raw, "kmeans", Dataset::Synthetic).is_err()
        );
    }
}
