//! Hoeffding tree with adaptive branch replacement.
//!
//! Leaves keep per-class Gaussian summaries of every key they see and
//! split when the Hoeffding bound separates the best candidate from the
//! runner-up (or the bound falls under the tie threshold). Every split node
//! monitors the error of predictions routed through it; a significant rise
//! starts an alternate subtree that replaces the branch once it is
//! significantly more accurate.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{digest_of, Gaussian, OnlineModel, Proba};
use crate::features::{FeatureKey, FeatureVector};
use crate::stream::ClassLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatcConfig {
    pub max_depth: usize,
    pub tie_threshold: f64,
    /// Node budget in thousands of nodes.
    pub max_size: usize,
    pub grace_period: f64,
    pub delta: f64,
    /// Candidate thresholds per key, evenly spaced between observed extremes.
    pub split_points: usize,
    /// Minimum fraction of weight each branch of a candidate split must receive.
    pub min_branch_fraction: f64,
    pub adaptive: bool,
    /// Width of the error window used by branch monitors.
    pub drift_window: usize,
    /// One-sided z critical value (2.326 ≈ 99 %).
    pub drift_z: f64,
    /// Samples an alternate must see before it may replace its branch.
    pub alternate_min: u64,
}

impl Default for HatcConfig {
    fn default() -> Self {
        Self {
            max_depth: 50,
            tie_threshold: 0.05,
            max_size: 50,
            grace_period: 200.0,
            delta: 1e-7,
            split_points: 10,
            min_branch_fraction: 0.01,
            adaptive: true,
            drift_window: 1000,
            drift_z: 2.326,
            alternate_min: 300,
        }
    }
}

impl HatcConfig {
    pub fn node_budget(&self) -> usize {
        self.max_size * 1000
    }
}

fn z_two_proportion(e1: f64, n1: f64, e2: f64, n2: f64) -> f64 {
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    let p = (e1 + e2) / (n1 + n2);
    let se = (p * (1.0 - p) * (1.0 / n1 + 1.0 / n2)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (e1 / n1 - e2 / n2) / se
}

/// Error rate over the last `drift_window` predictions against all older ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ErrorMonitor {
    window: VecDeque<bool>,
    window_errors: u64,
    reference_n: u64,
    reference_errors: u64,
}

impl ErrorMonitor {
    /// Records one outcome; true when the recent error rate rose significantly.
    fn record(&mut self, error: bool, config: &HatcConfig) -> bool {
        self.window.push_back(error);
        self.window_errors += error as u64;
        if self.window.len() > config.drift_window {
            let old = self.window.pop_front().unwrap();
            self.window_errors -= old as u64;
            self.reference_n += 1;
            self.reference_errors += old as u64;
        }
        if self.window.len() < config.drift_window
            || (self.reference_n as usize) < config.drift_window
        {
            return false;
        }
        let z = z_two_proportion(
            self.window_errors as f64,
            self.window.len() as f64,
            self.reference_errors as f64,
            self.reference_n as f64,
        );
        if z > config.drift_z {
            *self = ErrorMonitor::default();
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct AlternateStats {
    n: u64,
    main_errors: u64,
    alternate_errors: u64,
}

enum AlternateDecision {
    Keep,
    Replace,
    Discard,
}

impl AlternateStats {
    fn record(
        &mut self,
        main_correct: bool,
        alternate_correct: bool,
        config: &HatcConfig,
    ) -> AlternateDecision {
        self.n += 1;
        self.main_errors += !main_correct as u64;
        self.alternate_errors += !alternate_correct as u64;
        if self.n < config.alternate_min {
            return AlternateDecision::Keep;
        }
        let n = self.n as f64;
        let z = z_two_proportion(self.main_errors as f64, n, self.alternate_errors as f64, n);
        if z > config.drift_z {
            AlternateDecision::Replace
        } else if (self.n as usize >= config.drift_window && z < -config.drift_z)
            || self.n as usize >= 10 * config.drift_window
        {
            AlternateDecision::Discard
        } else {
            AlternateDecision::Keep
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    counts: Vec<f64>,
    stats: BTreeMap<FeatureKey, Vec<Gaussian>>,
    last_eval: f64,
    mc_correct: f64,
    nb_correct: f64,
}

fn argmax(v: &[f64]) -> usize {
    Proba(v.to_vec()).argmax()
}

fn entropy(dist: &[f64]) -> f64 {
    let total: f64 = dist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    dist.iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

struct Candidate {
    merit: f64,
    key: FeatureKey,
    threshold: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Leaf {
    fn new(counts: Vec<f64>) -> Self {
        let last_eval = counts.iter().sum();
        Self {
            counts,
            stats: BTreeMap::new(),
            last_eval,
            mc_correct: 0.0,
            nb_correct: 0.0,
        }
    }

    fn weight(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn mc_proba(&self) -> Proba {
        Proba::from_scores(self.counts.clone())
    }

    fn nb_proba(&self, fv: &FeatureVector) -> Proba {
        let total = self.weight();
        if total <= 0.0 {
            return Proba::uniform(self.counts.len());
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

    fn predict(&self, fv: &FeatureVector) -> Proba {
        if self.weight() <= 0.0 {
            return Proba::uniform(self.counts.len());
        }
        if self.nb_correct >= self.mc_correct {
            self.nb_proba(fv)
        } else {
            self.mc_proba()
        }
    }

    /// Learns one sample and returns whether the pre-update prediction was right.
    fn learn(&mut self, fv: &FeatureVector, y: usize, w: f64) -> bool {
        let correct;
        if self.weight() > 0.0 {
            let mc = argmax(&self.counts) == y;
            let nb = self.nb_proba(fv).argmax() == y;
            correct = if self.nb_correct >= self.mc_correct {
                nb
            } else {
                mc
            };
            if mc {
                self.mc_correct += w;
            }
            if nb {
                self.nb_correct += w;
            }
        } else {
            correct = y == 0;
        }
        self.counts[y] += w;
        let n = self.counts.len();
        for (key, x) in fv.iter() {
            self.stats
                .entry(*key)
                .or_insert_with(|| vec![Gaussian::default(); n])[y]
                .update(x, w);
        }
        correct
    }

    fn best_candidate_for(
        &self,
        key: &FeatureKey,
        per_class: &[Gaussian],
        config: &HatcConfig,
    ) -> Option<Candidate> {
        let seen: Vec<&Gaussian> = per_class.iter().filter(|g| g.weight > 0.0).collect();
        let lo = seen.iter().map(|g| g.min).fold(f64::INFINITY, f64::min);
        let hi = seen.iter().map(|g| g.max).fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return None;
        }
        let pre: Vec<f64> = per_class.iter().map(|g| g.weight).collect();
        let total: f64 = pre.iter().sum();
        let pre_entropy = entropy(&pre);
        let mut best: Option<Candidate> = None;
        for i in 1..=config.split_points {
            let t = lo + (hi - lo) * i as f64 / (config.split_points + 1) as f64;
            let left: Vec<f64> = per_class
                .iter()
                .map(|g| {
                    if g.weight > 0.0 {
                        g.weight * g.cdf(t)
                    } else {
                        0.0
                    }
                })
                .collect();
            let right: Vec<f64> = pre
                .iter()
                .zip(&left)
                .map(|(p, l)| (p - l).max(0.0))
                .collect();
            let wl: f64 = left.iter().sum();
            let wr: f64 = right.iter().sum();
            if wl < config.min_branch_fraction * total || wr < config.min_branch_fraction * total {
                continue;
            }
            let merit = pre_entropy - (wl * entropy(&left) + wr * entropy(&right)) / total;
            if best.as_ref().is_none_or(|b| merit > b.merit) {
                best = Some(Candidate {
                    merit,
                    key: *key,
                    threshold: t,
                    left,
                    right,
                });
            }
        }
        best
    }

    fn attempt_split(&self, config: &HatcConfig) -> Option<Node> {
        if self.counts.iter().filter(|&&c| c > 0.0).count() < 2 {
            return None;
        }
        let mut best: Option<Candidate> = None;
        let mut second = 0.0_f64;
        for (key, per_class) in &self.stats {
            let Some(c) = self.best_candidate_for(key, per_class, config) else {
                continue;
            };
            match &best {
                Some(b) if c.merit <= b.merit => second = second.max(c.merit),
                _ => {
                    if let Some(b) = &best {
                        second = second.max(b.merit);
                    }
                    best = Some(c);
                }
            }
        }
        let best = best?;
        if best.merit <= 0.0 {
            return None;
        }
        let range = (self.counts.len() as f64).log2();
        let n = self.weight();
        let epsilon = (range * range * (1.0 / config.delta).ln() / (2.0 * n)).sqrt();
        if best.merit - second > epsilon || epsilon < config.tie_threshold {
            // children start from the estimated branch class distributions,
            // rescaled from the key's weight to the leaf's class counts
            let scale = |branch: &[f64]| -> Vec<f64> {
                let per_class = &self.stats[&best.key];
                branch
                    .iter()
                    .zip(per_class)
                    .zip(&self.counts)
                    .map(|((b, g), c)| {
                        if g.weight > 0.0 {
                            b / g.weight * c
                        } else {
                            0.0
                        }
                    })
                    .collect()
            };
            let left = scale(&best.left);
            let right = scale(&best.right);
            let branch_weight = [left.iter().sum(), right.iter().sum()];
            Some(Node::Split(Split {
                key: best.key,
                threshold: best.threshold,
                left: Box::new(Node::Leaf(Leaf::new(left))),
                right: Box::new(Node::Leaf(Leaf::new(right))),
                counts: self.counts.clone(),
                branch_weight,
                monitor: ErrorMonitor::default(),
                alternate: None,
                alternate_stats: AlternateStats::default(),
            }))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    key: FeatureKey,
    threshold: f64,
    left: Box<Node>,
    right: Box<Node>,
    counts: Vec<f64>,
    branch_weight: [f64; 2],
    monitor: ErrorMonitor,
    alternate: Option<Box<Node>>,
    alternate_stats: AlternateStats,
}

impl Split {
    fn route(&self, fv: &FeatureVector) -> Branch {
        match fv.get(&self.key) {
            Some(x) if x > self.threshold => Branch::Right,
            Some(_) => Branch::Left,
            None => Branch::Missing,
        }
    }

    fn missing_goes_right(&self) -> bool {
        self.branch_weight[1] > self.branch_weight[0]
    }

    fn goes_right(&self, branch: Branch) -> bool {
        match branch {
            Branch::Right => true,
            Branch::Left => false,
            Branch::Missing => self.missing_goes_right(),
        }
    }
}

/// How a sample left a split node. `Missing` follows the heavier branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(Leaf),
    Split(Split),
}

impl Node {
    /// A terminal node with the given class weights.
    pub fn leaf(counts: Vec<f64>) -> Node {
        Node::Leaf(Leaf::new(counts))
    }

    /// A split sending `x > threshold` right; class weights are the children's sum.
    pub fn split(key: FeatureKey, threshold: f64, left: Node, right: Node) -> Node {
        let counts: Vec<f64> = left
            .class_counts()
            .iter()
            .zip(right.class_counts())
            .map(|(a, b)| a + b)
            .collect();
        let branch_weight = [
            left.class_counts().iter().sum(),
            right.class_counts().iter().sum(),
        ];
        Node::Split(Split {
            key,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
            counts,
            branch_weight,
            monitor: ErrorMonitor::default(),
            alternate: None,
            alternate_stats: AlternateStats::default(),
        })
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Node::Leaf(_))
    }

    pub fn feature(&self) -> Option<&FeatureKey> {
        match self {
            Node::Split(s) => Some(&s.key),
            Node::Leaf(_) => None,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            Node::Split(s) => Some(s.threshold),
            Node::Leaf(_) => None,
        }
    }

    pub fn left(&self) -> Option<&Node> {
        match self {
            Node::Split(s) => Some(&s.left),
            Node::Leaf(_) => None,
        }
    }

    pub fn right(&self) -> Option<&Node> {
        match self {
            Node::Split(s) => Some(&s.right),
            Node::Leaf(_) => None,
        }
    }

    /// Child taken when the split key is absent from a sample.
    pub fn missing_child(&self) -> Option<&Node> {
        match self {
            Node::Split(s) if s.missing_goes_right() => Some(&s.right),
            Node::Split(s) => Some(&s.left),
            Node::Leaf(_) => None,
        }
    }

    pub fn class_counts(&self) -> &[f64] {
        match self {
            Node::Leaf(l) => &l.counts,
            Node::Split(s) => &s.counts,
        }
    }

    pub fn has_alternate(&self) -> bool {
        matches!(self, Node::Split(s) if s.alternate.is_some())
    }

    /// Nodes in this subtree, alternates included.
    pub fn count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(s) => {
                1 + s.left.count() + s.right.count() + s.alternate.as_ref().map_or(0, |a| a.count())
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    fn leaf_for(&self, fv: &FeatureVector) -> &Leaf {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(l) => return l,
                Node::Split(s) => {
                    node = if s.goes_right(s.route(fv)) {
                        &s.right
                    } else {
                        &s.left
                    };
                }
            }
        }
    }
}

/// One split on a decision path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub key: FeatureKey,
    pub threshold: f64,
    pub branch: Branch,
    /// Sample value at the split, if present.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub steps: Vec<PathStep>,
    pub proba: Proba,
}

struct LearnContext<'a> {
    config: &'a HatcConfig,
    nodes: usize,
    /// Set when a branch was replaced or an alternate dropped.
    recount: bool,
}

fn learn_node(
    node: &mut Node,
    fv: &FeatureVector,
    y: usize,
    w: f64,
    depth: usize,
    ctx: &mut LearnContext,
) -> bool {
    let mut replacement = None;
    let correct = match node {
        Node::Leaf(leaf) => {
            let correct = leaf.learn(fv, y, w);
            let config = ctx.config;
            if leaf.weight() - leaf.last_eval >= config.grace_period
                && depth < config.max_depth
                && ctx.nodes + 2 <= config.node_budget()
            {
                leaf.last_eval = leaf.weight();
                if let Some(split) = leaf.attempt_split(config) {
                    replacement = Some(split);
                    ctx.nodes += 2;
                }
            }
            correct
        }
        Node::Split(s) => {
            let right = s.goes_right(s.route(fv));
            s.counts[y] += w;
            s.branch_weight[right as usize] += w;
            let child = if right { &mut s.right } else { &mut s.left };
            let correct = learn_node(child, fv, y, w, depth + 1, ctx);
            if ctx.config.adaptive {
                if s.monitor.record(!correct, ctx.config)
                    && s.alternate.is_none()
                    && ctx.nodes < ctx.config.node_budget()
                {
                    s.alternate = Some(Box::new(Node::leaf(vec![0.0; s.counts.len()])));
                    s.alternate_stats = AlternateStats::default();
                    ctx.nodes += 1;
                }
                if let Some(alt) = s.alternate.as_mut() {
                    let alt_correct = learn_node(alt, fv, y, w, depth, ctx);
                    match s.alternate_stats.record(correct, alt_correct, ctx.config) {
                        AlternateDecision::Keep => {}
                        AlternateDecision::Replace => {
                            replacement = s.alternate.take().map(|a| *a);
                            ctx.recount = true;
                        }
                        AlternateDecision::Discard => {
                            s.alternate = None;
                            ctx.recount = true;
                        }
                    }
                }
            }
            correct
        }
    };
    if let Some(r) = replacement {
        *node = r;
    }
    correct
}

/// Hoeffding adaptive tree classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTree {
    n_classes: usize,
    config: HatcConfig,
    root: Node,
    n_nodes: usize,
}

impl HoeffdingTree {
    pub fn new(n_classes: usize, config: HatcConfig) -> Self {
        Self::from_root(n_classes, config, Node::leaf(vec![0.0; n_classes]))
    }

    /// A tree with an explicit structure, e.g. for tests of path extraction.
    pub fn from_root(n_classes: usize, config: HatcConfig, root: Node) -> Self {
        let n_nodes = root.count();
        Self {
            n_classes,
            config,
            root,
            n_nodes,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn config(&self) -> &HatcConfig {
        &self.config
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn learn_weighted(&mut self, fv: &FeatureVector, label: ClassLabel, weight: f64) {
        let y = label.index();
        if weight <= 0.0 || y >= self.n_classes {
            return;
        }
        let mut ctx = LearnContext {
            config: &self.config,
            nodes: self.n_nodes,
            recount: false,
        };
        learn_node(&mut self.root, fv, y, weight, 0, &mut ctx);
        self.n_nodes = if ctx.recount {
            self.root.count()
        } else {
            ctx.nodes
        };
    }

    /// Route of `fv` from the root to its leaf.
    pub fn decision_path(&self, fv: &FeatureVector) -> DecisionPath {
        let mut steps = Vec::new();
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(l) => {
                    return DecisionPath {
                        steps,
                        proba: l.predict(fv),
                    }
                }
                Node::Split(s) => {
                    let branch = s.route(fv);
                    steps.push(PathStep {
                        key: s.key,
                        threshold: s.threshold,
                        branch,
                        value: fv.get(&s.key),
                    });
                    node = if s.goes_right(branch) {
                        &s.right
                    } else {
                        &s.left
                    };
                }
            }
        }
    }
}

impl OnlineModel for HoeffdingTree {
    fn name(&self) -> &'static str {
        "hatc"
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn learn_one(&mut self, fv: &FeatureVector, label: Option<ClassLabel>) {
        if let Some(label) = label {
            self.learn_weighted(fv, label, 1.0);
        }
    }

    fn predict_proba_one(&self, fv: &FeatureVector) -> Proba {
        self.root.leaf_for(fv).predict(fv)
    }

    fn digest(&self) -> String {
        digest_of(self)
    }

    fn clone_box(&self) -> Box<dyn OnlineModel> {
        Box::new(self.clone())
    }
}
