//! Decision-path feature ranking and natural-language explanations.
//!
//! For every forest member that agrees with the forest's prediction, the
//! sample is walked from the root; each split taken on its `>` side counts
//! one use of its feature key. Keys ranked by count form the explanation's
//! headline features, and the path of the most confident agreeing tree
//! fills the text templates.

mod templates;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use templates::{render_templates, TemplateInputs};

use crate::features::{FeatureKey, FeatureVector};
use crate::models::{Arfc, Node, OnlineModel, PathStep};
use crate::stream::{ClassLabel, ClassSet};

/// Keys appended while walking `fv` down one tree: a key is appended each
/// time the sample goes right (`value > threshold`). Missing values follow
/// the tree's own missing-value branch without appending.
pub fn walk_greater(root: &Node, fv: &FeatureVector) -> Vec<FeatureKey> {
    let mut out = Vec::new();
    let mut node = root;
    while !node.is_terminal() {
        let key = node.feature().unwrap();
        let threshold = node.threshold().unwrap();
        node = match fv.get(key) {
            Some(x) if x > threshold => {
                out.push(*key);
                node.right().unwrap()
            }
            Some(_) => node.left().unwrap(),
            None => node.missing_child().unwrap(),
        };
    }
    out
}

/// Feature-use counts over the agreeing trees.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: BTreeMap<FeatureKey, usize>,
}

impl FrequencyTable {
    pub fn add(&mut self, key: FeatureKey) {
        *self.counts.entry(key).or_insert(0) += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Keys by decreasing count; equal counts in key string order.
    pub fn ranked(&self) -> Vec<(FeatureKey, usize)> {
        let mut out: Vec<(String, FeatureKey, usize)> = self
            .counts
            .iter()
            .map(|(k, &c)| (k.to_string(), *k, c))
            .collect();
        out.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        out.into_iter().map(|(_, k, c)| (k, c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub table: FrequencyTable,
    /// Ids of the trees whose own prediction matched.
    pub agreeing: Vec<usize>,
}

/// Counts feature uses over every tree whose prediction equals `prediction`.
pub fn extract_relevant_features(
    forest: &Arfc,
    prediction: ClassLabel,
    fv: &FeatureVector,
) -> Extraction {
    let mut table = FrequencyTable::default();
    let mut agreeing = Vec::new();
    for (i, tree) in forest.trees().iter().enumerate() {
        let input = forest.tree_input(i, fv);
        if tree.predict_one(&input) != prediction {
            continue;
        }
        agreeing.push(i);
        for key in walk_greater(tree.root(), &input) {
            table.add(key);
        }
    }
    Extraction { table, agreeing }
}

/// A run of consecutive predictions of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_n: u64,
    pub end_n: u64,
    pub start_t: f64,
    pub end_t: f64,
    pub length: usize,
}

/// Tracks the most recent maximal run of `class` predictions of at least `min_run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTracker {
    pub class: ClassLabel,
    pub min_run: usize,
    current: Option<Interval>,
    last: Option<Interval>,
}

impl RunTracker {
    pub fn new(class: ClassLabel, min_run: usize) -> Self {
        Self {
            class,
            min_run: min_run.max(1),
            current: None,
            last: None,
        }
    }

    pub fn record(&mut self, n: u64, t: f64, label: ClassLabel) {
        if label == self.class {
            match &mut self.current {
                Some(run) => {
                    run.end_n = n;
                    run.end_t = t;
                    run.length += 1;
                }
                None => {
                    self.current = Some(Interval {
                        start_n: n,
                        end_n: n,
                        start_t: t,
                        end_t: t,
                        length: 1,
                    })
                }
            }
        } else if let Some(run) = self.current.take() {
            if run.length >= self.min_run {
                self.last = Some(run);
            }
        }
    }

    pub fn interval(&self) -> Option<Interval> {
        match self.current {
            Some(run) if run.length >= self.min_run => Some(run),
            _ => self.last,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedKey {
    pub key: FeatureKey,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub n: u64,
    pub timestamp: f64,
    pub prediction: ClassLabel,
    pub confidence: f64,
    /// Top-ranked feature keys.
    pub gamma: Vec<RankedKey>,
    pub display_key: Option<FeatureKey>,
    /// True when the display key came from the variance ranking, not the paths.
    pub display_fallback: bool,
    /// Tree whose path is shown.
    pub tree: Option<usize>,
    pub path: Vec<PathStep>,
    pub texts: [String; 4],
    pub interval: Option<Interval>,
}

/// Number of ranked keys carried in a report.
pub const GAMMA_LIMIT: usize = 20;

/// Everything outside the forest needed to explain one sample.
pub struct ExplainContext<'a> {
    pub classes: &'a ClassSet,
    /// Current running variance of a key.
    pub variance: &'a dyn Fn(&FeatureKey) -> Option<f64>,
    /// Squared selection threshold.
    pub threshold: f64,
    /// Fallback display key when no path uses a `>` branch.
    pub fallback_key: Option<FeatureKey>,
    pub interval: Option<Interval>,
}

pub fn explain(forest: &Arfc, fv: &FeatureVector, ctx: &ExplainContext) -> ExplanationReport {
    let proba = forest.predict_proba_one(fv);
    let prediction = proba.label();
    let extraction = extract_relevant_features(forest, prediction, fv);
    let ranked = extraction.table.ranked();

    // shown path: the agreeing tree most confident in the prediction
    let mut shown: Option<(usize, f64, Vec<PathStep>)> = None;
    for &i in &extraction.agreeing {
        let path = forest.trees()[i].decision_path(&forest.tree_input(i, fv));
        let p = path.proba.get(prediction);
        if shown.as_ref().is_none_or(|(_, best, _)| p > *best) {
            shown = Some((i, p, path.steps));
        }
    }
    let (tree, path) = match shown {
        Some((i, _, steps)) => (Some(i), steps),
        None => (None, Vec::new()),
    };

    let (display_key, display_fallback) = match ranked.first() {
        Some((k, _)) => (Some(*k), false),
        None => (ctx.fallback_key, ctx.fallback_key.is_some()),
    };
    let confidence = proba.get(prediction);
    let texts = render_templates(&TemplateInputs {
        path: &path,
        prediction,
        confidence,
        classes: ctx.classes,
        variance: ctx.variance,
        threshold: ctx.threshold,
        interval: ctx.interval,
    });
    ExplanationReport {
        n: fv.n,
        timestamp: fv.timestamp,
        prediction,
        confidence,
        gamma: ranked
            .into_iter()
            .take(GAMMA_LIMIT)
            .map(|(key, count)| RankedKey { key, count })
            .collect(),
        display_key,
        display_fallback,
        tree,
        path,
        texts,
        interval: ctx.interval,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Metric, WindowKind};
    use crate::models::{HatcConfig, HoeffdingTree};
    use crate::stream::SensorAddress;

    fn key(i: usize) -> FeatureKey {
        FeatureKey::engineered(Metric::Q2, WindowKind::Q1, SensorAddress::nordic_set()[i])
    }

    fn fv(values: &[(FeatureKey, f64)]) -> FeatureVector {
        FeatureVector::new(0, 0.0, values.to_vec())
    }

    #[test]
    fn walk_appends_only_right_turns() {
        let (k1, k2) = (key(0), key(1));
        // k1 > 0 → (k2 > 5 → c0 | c1) | c2
        let root = Node::split(
            k1,
            0.0,
            Node::leaf(vec![0.0, 0.0, 1.0]),
            Node::split(
                k2,
                5.0,
                Node::leaf(vec![0.0, 1.0, 0.0]),
                Node::leaf(vec![1.0, 0.0, 0.0]),
            ),
        );
        assert_eq!(
            walk_greater(&root, &fv(&[(k1, 1.0), (k2, 6.0)])),
            vec![k1, k2]
        );
        assert_eq!(walk_greater(&root, &fv(&[(k1, 1.0), (k2, 5.0)])), vec![k1]);
        assert!(walk_greater(&root, &fv(&[(k1, -1.0), (k2, 9.0)])).is_empty());
    }

    #[test]
    fn ranking_ties_by_key_string() {
        let mut t = FrequencyTable::default();
        let (a, b) = (key(3), key(1));
        t.add(a);
        t.add(b);
        let ranked = t.ranked();
        assert!(ranked[0].0.to_string() < ranked[1].0.to_string());
        t.add(a);
        assert_eq!(t.ranked()[0], (a, 2));
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn forest_extraction_counts_agreeing_trees() {
        let (k1, k2) = (key(0), key(1));
        let agree = Node::split(
            k1,
            0.0,
            Node::leaf(vec![0.0, 1.0]),
            Node::leaf(vec![1.0, 0.0]),
        );
        let disagree = Node::split(
            k2,
            0.0,
            Node::leaf(vec![1.0, 0.0]),
            Node::leaf(vec![0.0, 1.0]),
        );
        let trees = vec![
            HoeffdingTree::from_root(2, HatcConfig::default(), agree.clone()),
            HoeffdingTree::from_root(2, HatcConfig::default(), agree),
            HoeffdingTree::from_root(2, HatcConfig::default(), disagree),
        ];
        let forest = Arfc::from_trees(2, trees);
        let x = fv(&[(k1, 1.0), (k2, 1.0)]);
        let e = extract_relevant_features(&forest, ClassLabel(0), &x);
        assert_eq!(e.agreeing, vec![0, 1]);
        assert_eq!(e.table.counts.get(&k1), Some(&2));
        assert_eq!(e.table.counts.get(&k2), None);
        let none = extract_relevant_features(&forest, ClassLabel(0), &fv(&[(k1, -1.0), (k2, 1.0)]));
        assert!(none.agreeing.is_empty());
        assert!(none.table.is_empty());
    }

    #[test]
    fn run_tracker_keeps_latest_long_run() {
        let mut r = RunTracker::new(ClassLabel(1), 3);
        let seq = [0, 1, 1, 1, 1, 0, 1, 1, 0, 0];
        for (n, &l) in seq.iter().enumerate() {
            r.record(n as u64, n as f64 * 0.04, ClassLabel(l));
        }
        let i = r.interval().unwrap();
        assert_eq!((i.start_n, i.end_n, i.length), (1, 4, 4));
        for n in 10..14 {
            r.record(n, n as f64 * 0.04, ClassLabel(1));
        }
        assert_eq!(r.interval().unwrap().start_n, 10);
        assert_eq!(RunTracker::new(ClassLabel(1), 25).interval(), None);
    }
}
