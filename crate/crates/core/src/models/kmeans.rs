//! Incremental K-means over feature vectors with varying key sets.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{digest_of, mix, OnlineModel, Proba};
use crate::features::{FeatureKey, FeatureVector};
use crate::stream::ClassLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    /// Step size of the winning centroid toward the sample.
    pub halflife: f64,
    /// Mean and spread of the random initial centroid coordinates.
    pub mu: f64,
    pub sigma: f64,
    /// Minkowski distance exponent.
    pub p: f64,
}

impl KMeansConfig {
    pub fn nordic(n_clusters: usize) -> Self {
        Self {
            n_clusters,
            halflife: 0.075,
            mu: 0.01,
            sigma: 0.001,
            p: 1.0,
        }
    }

    pub fn pamap2() -> Self {
        Self {
            n_clusters: 2,
            halflife: 0.77,
            mu: 0.01,
            sigma: 10.0,
            p: 1.0,
        }
    }
}

/// Centroid coordinates are created on first sight of a key, drawn from a
/// Gaussian seeded by (seed, cluster, key), so they do not depend on the
/// order in which keys appear.
#[derive(Debug, Clone, Serialize)]
pub struct KMeans {
    config: KMeansConfig,
    seed: u64,
    centroids: Vec<BTreeMap<FeatureKey, f64>>,
}

impl KMeans {
    pub fn new(config: KMeansConfig, seed: u64) -> Result<Self> {
        if config.n_clusters < 2 {
            return Err(Error::Config(format!(
                "K-means needs at least 2 clusters, got {}",
                config.n_clusters
            )));
        }
        if !(config.p > 0.0) {
            return Err(Error::Config(format!(
                "distance exponent must be > 0, got {}",
                config.p
            )));
        }
        Ok(Self {
            centroids: vec![BTreeMap::new(); config.n_clusters],
            config,
            seed,
        })
    }

    pub fn config(&self) -> &KMeansConfig {
        &self.config
    }

    fn initial(&self, cluster: usize, key: &FeatureKey) -> f64 {
        let s = mix(self.seed ^ mix((cluster as u64 + 1) << 32 | key.code() as u64));
        let z: f64 = ChaCha8Rng::seed_from_u64(s).sample(StandardNormal);
        self.config.mu + self.config.sigma * z
    }

    pub fn coordinate(&self, cluster: usize, key: &FeatureKey) -> f64 {
        self.centroids[cluster]
            .get(key)
            .copied()
            .unwrap_or_else(|| self.initial(cluster, key))
    }

    fn distance(&self, cluster: usize, fv: &FeatureVector) -> f64 {
        let p = self.config.p;
        fv.iter()
            .map(|(k, x)| {
                let d = (x - self.coordinate(cluster, k)).abs();
                if p == 1.0 {
                    d
                } else {
                    d.powf(p)
                }
            })
            .sum()
    }

    /// Nearest centroid over the keys present in `fv`; lowest index on ties.
    pub fn assign(&self, fv: &FeatureVector) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..self.config.n_clusters {
            let d = self.distance(c, fv);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        best
    }

    /// Assigns `fv`, moves the winner toward it and returns the winner.
    pub fn learn_predict(&mut self, fv: &FeatureVector) -> usize {
        for c in 0..self.config.n_clusters {
            for key in fv.keys() {
                if !self.centroids[c].contains_key(key) {
                    let v = self.initial(c, key);
                    self.centroids[c].insert(*key, v);
                }
            }
        }
        let winner = self.assign(fv);
        let rate = self.config.halflife;
        let centroid = &mut self.centroids[winner];
        for (key, x) in fv.iter() {
            let c = centroid.get_mut(key).unwrap();
            *c += rate * (x - *c);
        }
        winner
    }
}

impl OnlineModel for KMeans {
    fn name(&self) -> &'static str {
        "kmeans"
    }

    fn n_classes(&self) -> usize {
        self.config.n_clusters
    }

    fn learn_one(&mut self, fv: &FeatureVector, _label: Option<ClassLabel>) {
        self.learn_predict(fv);
    }

    fn predict_proba_one(&self, fv: &FeatureVector) -> Proba {
        Proba::one_hot(self.config.n_clusters, self.assign(fv))
    }

    fn learn_predict_one(&mut self, fv: &FeatureVector, _label: Option<ClassLabel>) -> ClassLabel {
        ClassLabel(self.learn_predict(fv) as u8)
    }

    fn digest(&self) -> String {
        digest_of(self)
    }

    fn clone_box(&self) -> Box<dyn OnlineModel> {
        Box::new(self.clone())
    }

    fn is_clusterer(&self) -> bool {
        true
    }
}
