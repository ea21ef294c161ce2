//! Unsupervised assessment loop: clustering, judge tags, cluster labelling
//! and the explainer forest trained on the expanded labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::explain::{explain, ExplainContext, ExplanationReport, RunTracker};
use crate::features::{FeatureConfig, FeaturePipeline, FeatureVector, Phase, Step};
use crate::labeling::{
    best_mapping, expand_tags, ClusterLabelMap, JudgeMode, JudgeTag, Provenance,
};
use crate::models::{Arfc, KMeans, ModelParams, OnlineModel, Proba};
use crate::stream::{ClassLabel, RawSlot, StreamDescriptor};
use crate::{Error, Result};

/// Where the label of a clustered sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// The cluster map built from judge tags.
    Tags,
    /// Best mapping against ground truth seen so far; used until tags cover every cluster.
    Bootstrap,
    /// No tags and no ground truth: the cluster id itself.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnsupervisedConfig {
    /// Slots between cluster map recomputations.
    pub tick_slots: u64,
    pub mode: JudgeMode,
}

impl Default for UnsupervisedConfig {
    fn default() -> Self {
        Self {
            tick_slots: 500,
            mode: JudgeMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnsupervisedStep {
    pub cluster: usize,
    pub label: ClassLabel,
    pub source: LabelSource,
    /// Explainer probabilities before it learned this sample.
    pub proba: Proba,
}

#[derive(Debug, Clone)]
pub struct UnsupervisedLoop {
    kmeans: KMeans,
    explainer: Arfc,
    n_classes: usize,
    config: UnsupervisedConfig,
    assignments: BTreeMap<u64, usize>,
    pending: Vec<JudgeTag>,
    delivered: Vec<JudgeTag>,
    map: Option<ClusterLabelMap>,
    next_tick: u64,
    /// cluster × true class, over learned samples with ground truth
    oracle_counts: Vec<Vec<u64>>,
    truth_seen: bool,
}

impl UnsupervisedLoop {
    pub fn new(params: &ModelParams, config: UnsupervisedConfig) -> Result<Self> {
        if params.kmeans.n_clusters != params.n_classes {
            return Err(Error::Config(format!(
                "cluster count {} must equal class count {}",
                params.kmeans.n_clusters, params.n_classes
            )));
        }
        if config.tick_slots == 0 {
            return Err(Error::Config(
                "map tick interval must be at least one slot".into(),
            ));
        }
        Ok(Self {
            kmeans: KMeans::new(params.kmeans.clone(), params.seed)?,
            explainer: Arfc::new(
                params.n_classes,
                params.arfc.clone(),
                params.hatc.clone(),
                params.seed ^ 0xe8,
            ),
            n_classes: params.n_classes,
            config,
            assignments: BTreeMap::new(),
            pending: Vec::new(),
            delivered: Vec::new(),
            map: None,
            next_tick: config.tick_slots,
            oracle_counts: vec![vec![0; params.n_classes]; params.n_classes],
            truth_seen: false,
        })
    }

    /// Queues a tag; it takes effect once the stream reaches its slot.
    pub fn add_tag(&mut self, tag: JudgeTag) {
        let at = self.pending.partition_point(|t| t.slot <= tag.slot);
        self.pending.insert(at, tag);
    }

    fn deliver(&mut self, n: u64) {
        let due = self.pending.partition_point(|t| t.slot <= n);
        self.delivered.extend(self.pending.drain(..due));
    }

    /// Recomputes the cluster map from the tags delivered so far. A map that
    /// would leave clusters untagged is not adopted.
    pub fn tick(&mut self) -> Result<()> {
        if self.delivered.is_empty() {
            return Ok(());
        }
        match expand_tags(
            &self.assignments,
            &self.delivered,
            self.n_classes,
            self.config.mode,
        ) {
            Ok(map) => {
                self.map = Some(map);
                Ok(())
            }
            Err(Error::Coverage { .. }) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Delivers every queued tag and recomputes the map, for when the stream has ended.
    pub fn flush(&mut self) -> Result<()> {
        self.deliver(u64::MAX);
        self.tick()
    }

    fn resolve(&self, cluster: usize) -> (ClassLabel, LabelSource) {
        if let Some(map) = &self.map {
            return (map.label(cluster), LabelSource::Tags);
        }
        if self.truth_seen {
            if let Ok((map, _)) = best_mapping(&self.oracle_counts) {
                return (map.label(cluster), LabelSource::Bootstrap);
            }
        }
        (ClassLabel(cluster as u8), LabelSource::Identity)
    }

    /// Processes one sample. With `learn` the clusterer and explainer are
    /// updated; otherwise the sample is only assigned and labelled.
    pub fn step(
        &mut self,
        fv: &FeatureVector,
        truth: Option<ClassLabel>,
        learn: bool,
    ) -> Result<UnsupervisedStep> {
        self.deliver(fv.n);
        let cluster = if learn {
            let c = self.kmeans.learn_predict(fv);
            self.assignments.insert(fv.n, c);
            c
        } else {
            self.kmeans.assign(fv)
        };
        if fv.n >= self.next_tick {
            self.tick()?;
            self.next_tick = (fv.n / self.config.tick_slots + 1) * self.config.tick_slots;
        }
        let (label, source) = self.resolve(cluster);
        let proba = self.explainer.predict_proba_one(fv);
        if learn {
            self.explainer.learn_one(fv, Some(label));
            if let Some(t) = truth.filter(|t| t.index() < self.n_classes) {
                self.oracle_counts[cluster][t.index()] += 1;
                self.truth_seen = true;
            }
        }
        Ok(UnsupervisedStep {
            cluster,
            label,
            source,
            proba,
        })
    }

    pub fn map(&self) -> Option<&ClusterLabelMap> {
        self.map.as_ref()
    }

    pub fn provenance(&self) -> Option<Provenance> {
        match &self.map {
            Some(m) => Some(m.provenance),
            None if self.truth_seen => Some(Provenance::BestMappingOracle),
            None => None,
        }
    }

    pub fn assignments(&self) -> &BTreeMap<u64, usize> {
        &self.assignments
    }

    pub fn delivered_tags(&self) -> &[JudgeTag] {
        &self.delivered
    }

    pub fn pending_tags(&self) -> &[JudgeTag] {
        &self.pending
    }

    pub fn kmeans(&self) -> &KMeans {
        &self.kmeans
    }

    pub fn explainer(&self) -> &Arfc {
        &self.explainer
    }

    /// Best-mapping accuracy of every learned assignment against ground truth.
    pub fn oracle_accuracy(&self) -> Option<f64> {
        if !self.truth_seen {
            return None;
        }
        best_mapping(&self.oracle_counts).ok().map(|(_, acc)| acc)
    }

    pub fn oracle_counts(&self) -> &[Vec<u64>] {
        &self.oracle_counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub features: FeatureConfig,
    pub params: ModelParams,
    /// Every `stride`-th sample is learned; all samples are predicted.
    pub stride: usize,
    pub unsupervised: UnsupervisedConfig,
    /// Shortest run of cheating predictions reported as an interval.
    pub min_run: usize,
}

impl SessionConfig {
    pub fn new(n_classes: usize, seed: u64) -> Self {
        Self {
            features: FeatureConfig::default(),
            params: ModelParams::new(n_classes, seed),
            stride: 10,
            unsupervised: UnsupervisedConfig::default(),
            min_run: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub n: u64,
    pub timestamp: f64,
    pub label: ClassLabel,
    pub proba: Proba,
    pub cluster: usize,
    pub source: LabelSource,
    pub learned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub slots: u64,
    pub samples: u64,
    pub learned: u64,
    pub phase: Phase,
    pub threshold: Option<f64>,
    pub provenance: Option<Provenance>,
    pub cluster_labels: Option<Vec<ClassLabel>>,
    pub tags_delivered: usize,
    pub tags_pending: usize,
    /// Tags that contributed to the current map.
    pub tags_used: usize,
    /// Against ground truth, when the stream carries it.
    pub accuracy: Option<f64>,
    /// Explainer prediction vs. cluster label.
    pub agreement: Option<f64>,
}

/// Outcome of one slot in a live session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionStep {
    pub phase: Phase,
    pub sample: Option<FeatureVector>,
    pub prediction: Option<Prediction>,
}

/// Live session over one stream: features, unsupervised loop, explanations.
#[derive(Debug)]
pub struct Session {
    pipeline: FeaturePipeline,
    unsupervised: UnsupervisedLoop,
    config: SessionConfig,
    tracker: RunTracker,
    slots: u64,
    samples: u64,
    learned: u64,
    hits: u64,
    scored: u64,
    agree: u64,
    last_n: Option<u64>,
    last_sample: Option<FeatureVector>,
}

impl Session {
    pub fn new(descriptor: StreamDescriptor, config: SessionConfig) -> Result<Self> {
        if config.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if config.params.n_classes != descriptor.classes.len() {
            return Err(Error::Config(format!(
                "model expects {} classes, stream has {}",
                config.params.n_classes,
                descriptor.classes.len()
            )));
        }
        Ok(Self {
            pipeline: FeaturePipeline::new(descriptor, config.features)?,
            unsupervised: UnsupervisedLoop::new(&config.params, config.unsupervised)?,
            tracker: RunTracker::new(ClassLabel(1), config.min_run),
            config,
            slots: 0,
            samples: 0,
            learned: 0,
            hits: 0,
            scored: 0,
            agree: 0,
            last_n: None,
            last_sample: None,
        })
    }

    pub fn descriptor(&self) -> &StreamDescriptor {
        self.pipeline.descriptor()
    }

    pub fn pipeline(&self) -> &FeaturePipeline {
        &self.pipeline
    }

    pub fn unsupervised(&self) -> &UnsupervisedLoop {
        &self.unsupervised
    }

    pub fn push(&mut self, slot: &RawSlot) -> Result<SessionStep> {
        self.slots += 1;
        self.last_n = Some(slot.n);
        let fv = match self.pipeline.push(slot)? {
            Step::Sample(fv) => fv,
            _ => {
                return Ok(SessionStep {
                    phase: self.pipeline.phase(),
                    sample: None,
                    prediction: None,
                })
            }
        };
        self.samples += 1;
        let learn = self.samples % self.config.stride as u64 == 0;
        let step = self.unsupervised.step(&fv, slot.ground_truth, learn)?;
        if learn {
            self.learned += 1;
        }
        if let Some(t) = slot.ground_truth {
            self.scored += 1;
            self.hits += u64::from(t == step.label);
        }
        self.agree += u64::from(step.proba.label() == step.label);
        self.tracker.record(fv.n, fv.timestamp, step.label);
        let prediction = Prediction {
            n: fv.n,
            timestamp: fv.timestamp,
            label: step.label,
            proba: step.proba,
            cluster: step.cluster,
            source: step.source,
            learned: learn,
        };
        self.last_sample = Some(fv.clone());
        Ok(SessionStep {
            phase: Phase::Running,
            sample: Some(fv),
            prediction: Some(prediction),
        })
    }

    /// Records a judge tag. Without a slot the tag lands on the latest slot seen.
    pub fn add_tag(
        &mut self,
        label: ClassLabel,
        slot: Option<u64>,
        source: &str,
    ) -> Result<JudgeTag> {
        if !self.descriptor().classes.contains(label) {
            return Err(Error::Config(format!(
                "label {label} is not a class of this session"
            )));
        }
        let slot = slot.or(self.last_n).unwrap_or(0);
        let tag = JudgeTag {
            slot,
            label,
            source: source.to_string(),
        };
        self.unsupervised.add_tag(tag.clone());
        Ok(tag)
    }

    /// Applies queued tags immediately; used once the stream has ended.
    pub fn flush_tags(&mut self) -> Result<()> {
        self.unsupervised.flush()
    }

    /// Explains the explainer's prediction for the latest sample.
    pub fn explain(&self) -> Option<ExplanationReport> {
        let fv = self.last_sample.as_ref()?;
        let engine = self.pipeline.engine()?;
        let variance = |k: &crate::features::FeatureKey| engine.variance(k);
        let fallback_key = engine.ranked_by_variance().first().map(|(k, _)| *k);
        let ctx = ExplainContext {
            classes: &self.descriptor().classes,
            variance: &variance,
            threshold: self.pipeline.threshold().unwrap_or(0.0),
            fallback_key,
            interval: self.tracker.interval(),
        };
        Some(explain(self.unsupervised.explainer(), fv, &ctx))
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            slots: self.slots,
            samples: self.samples,
            learned: self.learned,
            phase: self.pipeline.phase(),
            threshold: self.pipeline.threshold(),
            provenance: self.unsupervised.provenance(),
            cluster_labels: self.unsupervised.map().map(|m| m.labels.clone()),
            tags_delivered: self.unsupervised.delivered_tags().len(),
            tags_pending: self.unsupervised.pending_tags().len(),
            tags_used: self.unsupervised.map().map_or(0, |m| m.tags_used),
            accuracy: (self.scored > 0).then(|| self.hits as f64 / self.scored as f64),
            agreement: (self.samples > 0).then(|| self.agree as f64 / self.samples as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKey, Metric, WindowKind};
    use crate::stream::SensorAddress;

    fn sample(n: u64, x: f64) -> FeatureVector {
        let key =
            FeatureKey::engineered(Metric::Avg, WindowKind::Q1, SensorAddress::nordic_set()[0]);
        FeatureVector::new(n, n as f64, vec![(key, x)])
    }

    fn params() -> ModelParams {
        let mut p = ModelParams::new(2, 3);
        p.kmeans.halflife = 0.5;
        p.arfc.models = 3;
        p
    }

    #[test]
    fn identity_labels_without_tags_or_truth() {
        let mut lp = UnsupervisedLoop::new(&params(), UnsupervisedConfig::default()).unwrap();
        let s = lp.step(&sample(0, 5.0), None, true).unwrap();
        assert_eq!(s.source, LabelSource::Identity);
        assert_eq!(s.label, ClassLabel(s.cluster as u8));
        assert_eq!(lp.provenance(), None);
    }

    #[test]
    fn tags_take_over_at_tick() {
        let cfg = UnsupervisedConfig {
            tick_slots: 10,
            mode: JudgeMode::Full,
        };
        let mut lp = UnsupervisedLoop::new(&params(), cfg).unwrap();
        let mut clusters = BTreeMap::new();
        for n in 0..10u64 {
            let x = if n % 2 == 0 { 0.0 } else { 100.0 };
            let truth = ClassLabel((n % 2) as u8);
            let s = lp.step(&sample(n, x), Some(truth), true).unwrap();
            clusters.insert(n % 2, s.cluster);
        }
        assert_ne!(clusters[&0], clusters[&1]);
        // tags name the far cluster c0, the reverse of ground truth
        lp.add_tag(JudgeTag {
            slot: 11,
            label: ClassLabel(0),
            source: "j".into(),
        });
        lp.add_tag(JudgeTag {
            slot: 12,
            label: ClassLabel(1),
            source: "j".into(),
        });
        let before = lp
            .step(&sample(10, 0.0), Some(ClassLabel(0)), true)
            .unwrap();
        assert_eq!(before.source, LabelSource::Bootstrap);
        assert_eq!(lp.delivered_tags().len(), 0);
        lp.step(&sample(11, 100.0), None, true).unwrap();
        lp.step(&sample(12, 0.0), None, true).unwrap();
        assert_eq!(lp.delivered_tags().len(), 2);
        assert!(lp.map().is_none());
        let mut last = None;
        for n in 13..=20 {
            last = Some(lp.step(&sample(n, 100.0), None, true).unwrap());
        }
        let last = last.unwrap();
        assert_eq!(last.source, LabelSource::Tags);
        assert_eq!(last.label, ClassLabel(0));
        assert_eq!(lp.provenance(), Some(Provenance::JudgeTags));
    }

    #[test]
    fn mismatched_cluster_count_is_config_error() {
        let mut p = params();
        p.kmeans.n_clusters = 3;
        assert!(matches!(
            UnsupervisedLoop::new(&p, UnsupervisedConfig::default()),
            Err(Error::Config(_))
        ));
    }
}
