use std::collections::BTreeMap;

use serde::Serialize;

use super::{digest_of, Gaussian, OnlineModel, Proba};
use crate::features::{FeatureKey, FeatureVector};
use crate::stream::ClassLabel;

/// Gaussian naive Bayes with per-class running moments.
///
/// A key never seen for a class is skipped for that class, so channels
/// that are absent at some slots do not zero a posterior.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianNb {
    n_classes: usize,
    counts: Vec<f64>,
    stats: BTreeMap<FeatureKey, Vec<Gaussian>>,
}

impl GaussianNb {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![0.0; n_classes],
            stats: BTreeMap::new(),
        }
    }

    pub fn class_counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn stats(&self, key: &FeatureKey) -> Option<&[Gaussian]> {
        self.stats.get(key).map(Vec::as_slice)
    }
}

impl OnlineModel for GaussianNb {
    fn name(&self) -> &'static str {
        "gnb"
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn learn_one(&mut self, fv: &FeatureVector, label: Option<ClassLabel>) {
        let Some(label) = label else { return };
        let c = label.index();
        if c >= self.n_classes {
            return;
        }
        self.counts[c] += 1.0;
        for (key, x) in fv.iter() {
            let n = self.n_classes;
            self.stats
                .entry(*key)
                .or_insert_with(|| vec![Gaussian::default(); n])[c]
                .update(x, 1.0);
        }
    }

    fn predict_proba_one(&self, fv: &FeatureVector) -> Proba {
        let total: f64 = self.counts.iter().sum();
        if total == 0.0 {
            return Proba::uniform(self.n_classes);
        }
        let mut scores: Vec<Option<f64>> = self
            .counts
            .iter()
            .map(|&n| (n > 0.0).then(|| (n / total).ln()))
            .collect();
        for (key, x) in fv.iter() {
            let Some(per_class) = self.stats.get(key) else {
                continue;
            };
            for (score, g) in scores.iter_mut().zip(per_class) {
                if let Some(s) = score {
                    if g.weight > 0.0 {
                        *s += g.ln_pdf(x);
                    }
                }
            }
        }
        Proba::from_log_scores(&scores)
    }

    fn digest(&self) -> String {
        digest_of(self)
    }

    fn clone_box(&self) -> Box<dyn OnlineModel> {
        Box::new(self.clone())
    }
}
