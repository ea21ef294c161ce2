//! Adaptive random forest of Hoeffding adaptive trees.
//!
//! Each tree sees its own random subset of feature keys and learns every
//! labelled sample with a Poisson-distributed weight drawn from its own
//! seeded stream. The forest probability is the normalized sum of tree
//! probabilities.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{digest_of, mix, HatcConfig, HoeffdingTree, OnlineModel, Proba};
use crate::features::{FeatureKey, FeatureVector};
use crate::stream::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Resampling {
    Off,
    Poisson { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArfcConfig {
    pub models: usize,
    /// Keys per tree; a value at or above the key count disables subsetting.
    pub features: usize,
    pub lambda: f64,
    /// Resample with `lambda` itself instead of `lambda / 10`.
    pub raw_lambda: bool,
    pub resample: bool,
}

impl Default for ArfcConfig {
    fn default() -> Self {
        Self {
            models: 50,
            features: 50,
            lambda: 50.0,
            raw_lambda: false,
            resample: true,
        }
    }
}

impl ArfcConfig {
    pub fn resampling(&self) -> Resampling {
        if !self.resample {
            Resampling::Off
        } else if self.raw_lambda {
            Resampling::Poisson {
                lambda: self.lambda,
            }
        } else {
            Resampling::Poisson {
                lambda: self.lambda / 10.0,
            }
        }
    }
}

const KEY_SPACE: usize = 1 << 16;

/// The `size` keys with the lowest per-tree priority among those seen so far.
#[derive(Debug, Clone, Serialize)]
struct KeySubset {
    size: usize,
    chosen: BTreeSet<(u64, FeatureKey)>,
    #[serde(skip)]
    bits: Vec<u64>,
}

impl KeySubset {
    fn new(size: usize) -> Self {
        Self {
            size,
            chosen: BTreeSet::new(),
            bits: vec![0; KEY_SPACE / 64],
        }
    }

    fn set_bit(&mut self, key: &FeatureKey, on: bool) {
        let code = key.code() as usize % KEY_SPACE;
        if on {
            self.bits[code / 64] |= 1 << (code % 64);
        } else {
            self.bits[code / 64] &= !(1 << (code % 64));
        }
    }

    fn contains(&self, key: &FeatureKey) -> bool {
        let code = key.code() as usize % KEY_SPACE;
        self.bits[code / 64] & (1 << (code % 64)) != 0
    }

    fn offer(&mut self, priority: u64, key: FeatureKey) {
        if self.chosen.len() < self.size {
            self.chosen.insert((priority, key));
            self.set_bit(&key, true);
            return;
        }
        let &last = self.chosen.iter().next_back().unwrap();
        if (priority, key) < last {
            self.chosen.remove(&last);
            self.set_bit(&last.1, false);
            self.chosen.insert((priority, key));
            self.set_bit(&key, true);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Arfc {
    n_classes: usize,
    config: ArfcConfig,
    seed: u64,
    trees: Vec<HoeffdingTree>,
    subsets: Vec<KeySubset>,
    seen: BTreeSet<FeatureKey>,
    #[serde(skip)]
    rngs: Vec<ChaCha8Rng>,
}

impl Arfc {
    pub fn new(n_classes: usize, config: ArfcConfig, tree_config: HatcConfig, seed: u64) -> Self {
        let models = config.models.max(1);
        Self {
            n_classes,
            trees: (0..models)
                .map(|_| HoeffdingTree::new(n_classes, tree_config.clone()))
                .collect(),
            subsets: (0..models)
                .map(|_| KeySubset::new(config.features))
                .collect(),
            rngs: (0..models)
                .map(|i| ChaCha8Rng::seed_from_u64(mix(seed ^ mix(i as u64 + 1))))
                .collect(),
            seen: BTreeSet::new(),
            config,
            seed,
        }
    }

    /// A forest over explicit trees, each seeing every key and never resampling.
    pub fn from_trees(n_classes: usize, trees: Vec<HoeffdingTree>) -> Self {
        let config = ArfcConfig {
            models: trees.len(),
            features: usize::MAX,
            resample: false,
            ..ArfcConfig::default()
        };
        Self {
            n_classes,
            subsets: trees.iter().map(|_| KeySubset::new(usize::MAX)).collect(),
            rngs: (0..trees.len())
                .map(|i| ChaCha8Rng::seed_from_u64(i as u64))
                .collect(),
            trees,
            seen: BTreeSet::new(),
            config,
            seed: 0,
        }
    }

    pub fn config(&self) -> &ArfcConfig {
        &self.config
    }

    pub fn trees(&self) -> &[HoeffdingTree] {
        &self.trees
    }

    fn subsetting(&self) -> bool {
        self.config.features < self.seen.len()
    }

    /// The sample as tree `i` sees it.
    pub fn tree_input(&self, i: usize, fv: &FeatureVector) -> FeatureVector {
        if !self.subsetting() {
            return fv.clone();
        }
        let subset = &self.subsets[i];
        fv.filtered(|k| subset.contains(k))
    }

    fn register_keys(&mut self, fv: &FeatureVector) {
        for key in fv.keys() {
            if self.seen.insert(*key) {
                for (i, subset) in self.subsets.iter_mut().enumerate() {
                    let priority = mix(self.seed ^ mix((i as u64) << 32 | key.code() as u64));
                    subset.offer(priority, *key);
                }
            }
        }
    }
}

impl OnlineModel for Arfc {
    fn name(&self) -> &'static str {
        "arfc"
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn learn_one(&mut self, fv: &FeatureVector, label: Option<ClassLabel>) {
        let Some(label) = label else { return };
        self.register_keys(fv);
        let poisson = match self.config.resampling() {
            Resampling::Off => None,
            Resampling::Poisson { lambda } => Some(Poisson::new(lambda).expect("lambda > 0")),
        };
        for i in 0..self.trees.len() {
            let weight = match &poisson {
                Some(p) => p.sample(&mut self.rngs[i]),
                None => 1.0,
            };
            if weight > 0.0 {
                let input = self.tree_input(i, fv);
                self.trees[i].learn_weighted(&input, label, weight);
            }
        }
    }

    fn predict_proba_one(&self, fv: &FeatureVector) -> Proba {
        let mut sum = vec![0.0; self.n_classes];
        for (i, tree) in self.trees.iter().enumerate() {
            let p = tree.predict_proba_one(&self.tree_input(i, fv));
            for (s, v) in sum.iter_mut().zip(&p.0) {
                *s += v;
            }
        }
        Proba::from_scores(sum)
    }

    fn digest(&self) -> String {
        digest_of(self)
    }

    fn clone_box(&self) -> Box<dyn OnlineModel> {
        Box::new(self.clone())
    }

    fn as_forest(&self) -> Option<&Arfc> {
        Some(self)
    }
}
