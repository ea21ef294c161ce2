//! Online models behind one learn/predict contract.
//!
//! Every model consumes [`FeatureVector`]s whose key sets may change from
//! slot to slot. Models are created by name through [`ModelRegistry`].

mod arfc;
mod gaussian;
mod gnb;
mod kmeans;
mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use arfc::{Arfc, ArfcConfig, Resampling};
pub use gaussian::{Gaussian, VAR_FLOOR};
pub use gnb::GaussianNb;
pub use kmeans::{KMeans, KMeansConfig};
pub use tree::{Branch, DecisionPath, HatcConfig, HoeffdingTree, Node, PathStep};

use crate::features::FeatureVector;
use crate::stream::ClassLabel;
use crate::{Error, Result};

/// Class probabilities indexed by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proba(pub Vec<f64>);

impl Proba {
    pub fn uniform(n: usize) -> Self {
        Proba(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, i: usize) -> Self {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        Proba(p)
    }

    /// Normalizes non-negative scores; all-zero scores give the uniform distribution.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Proba::uniform(scores.len());
        }
        Proba(scores.into_iter().map(|s| s / total).collect())
    }

    /// Softmax over log-scores; `None` entries get probability zero.
    pub fn from_log_scores(scores: &[Option<f64>]) -> Self {
        let max = scores
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Proba::uniform(scores.len());
        }
        Proba::from_scores(
            scores
                .iter()
                .map(|s| s.map_or(0.0, |s| (s - max).exp()))
                .collect(),
        )
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn label(&self) -> ClassLabel {
        ClassLabel(self.argmax() as u8)
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        self.0.get(label.index()).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub trait OnlineModel: Send + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Size of the label (or cluster) set.
    fn n_classes(&self) -> usize;

    /// Updates the model. Unsupervised models ignore `label`; supervised
    /// models skip unlabelled samples.
    fn learn_one(&mut self, fv: &FeatureVector, label: Option<ClassLabel>);

    fn predict_proba_one(&self, fv: &FeatureVector) -> Proba;

    fn predict_one(&self, fv: &FeatureVector) -> ClassLabel {
        self.predict_proba_one(fv).label()
    }

    /// Predicts, then learns. Clusterers return the cluster the sample was assigned to.
    fn learn_predict_one(&mut self, fv: &FeatureVector, label: Option<ClassLabel>) -> ClassLabel {
        let p = self.predict_one(fv);
        self.learn_one(fv, label);
        p
    }

    /// Hex SHA-256 of the serialized model state.
    fn digest(&self) -> String;

    fn clone_box(&self) -> Box<dyn OnlineModel>;

    /// The forest behind this model, for decision-path extraction.
    fn as_forest(&self) -> Option<&Arfc> {
        None
    }

    fn is_clusterer(&self) -> bool {
        false
    }
}

impl Clone for Box<dyn OnlineModel> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// SplitMix64 finalizer, used to derive independent seeds and priorities.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn digest_of<T: Serialize>(state: &T) -> String {
    let bytes = serde_json::to_vec(state).expect("model state serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Hyperparameters for every registered model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_classes: usize,
    pub seed: u64,
    pub hatc: HatcConfig,
    pub arfc: ArfcConfig,
    pub kmeans: KMeansConfig,
}

impl ModelParams {
    pub fn new(n_classes: usize, seed: u64) -> Self {
        Self {
            n_classes,
            seed,
            hatc: HatcConfig::default(),
            arfc: ArfcConfig::default(),
            kmeans: KMeansConfig::nordic(n_classes),
        }
    }

    /// PAMAP2 defaults differ only in the K-means hyperparameters.
    pub fn pamap2(seed: u64) -> Self {
        Self {
            kmeans: KMeansConfig::pamap2(),
            ..Self::new(2, seed)
        }
    }
}

pub type ModelFactory = fn(&ModelParams) -> Result<Box<dyn OnlineModel>>;

/// Name → factory table. The default registry holds `gnb`, `hatc`, `arfc` and `kmeans`.
#[derive(Debug, Clone)]
pub struct ModelRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self {
            factories: BTreeMap::new(),
        };
        r.register("gnb", |p| Ok(Box::new(GaussianNb::new(p.n_classes))));
        r.register("hatc", |p| {
            Ok(Box::new(HoeffdingTree::new(p.n_classes, p.hatc.clone())))
        });
        r.register("arfc", |p| {
            Ok(Box::new(Arfc::new(
                p.n_classes,
                p.arfc.clone(),
                p.hatc.clone(),
                p.seed,
            )))
        });
        r.register("kmeans", |p| {
            Ok(Box::new(KMeans::new(p.kmeans.clone(), p.seed)?))
        });
        r
    }
}

impl ModelRegistry {
    pub fn register(&mut self, name: &str, factory: ModelFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, params: &ModelParams) -> Result<Box<dyn OnlineModel>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown model `{name}` (available: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(params)
    }
}
