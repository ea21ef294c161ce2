use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{MetricsAccumulator, PrequentialMetrics};
use super::{ScenarioId, ScenarioSpec};
use crate::calibration::WindowSet;
use crate::features::{FeatureConfig, FeaturePipeline, FeatureVector, Step};
use crate::labeling::{simulate_tags, JudgeTag, Provenance};
use crate::models::{ModelParams, ModelRegistry, OnlineModel, Proba};
use crate::session::{LabelSource, UnsupervisedConfig, UnsupervisedLoop};
use crate::stream::{ClassLabel, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    /// The data kind is taken from the scenario.
    pub features: FeatureConfig,
    pub params: ModelParams,
    pub registry: ModelRegistry,
    /// Judge tags for scenario D.
    pub tags: Vec<JudgeTag>,
    pub unsupervised: UnsupervisedConfig,
    /// Record the predict/learn call sequence.
    pub trace: bool,
    /// Report wall-clock time in the metrics.
    pub timing: bool,
}

impl RunOptions {
    pub fn new(params: ModelParams) -> Self {
        Self {
            seed: params.seed,
            features: FeatureConfig::default(),
            params,
            registry: ModelRegistry::default(),
            tags: Vec::new(),
            unsupervised: UnsupervisedConfig::default(),
            trace: false,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Predict(u64),
    Learn(u64),
}

/// One scored sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub n: u64,
    pub truth: Option<ClassLabel>,
    pub pred: ClassLabel,
    pub proba: Proba,
    /// Labelled by the ground-truth mapping before tags covered every cluster.
    pub bootstrap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsupervisedOutcome {
    /// Best-mapping accuracy over every assignment.
    pub oracle_accuracy: Option<f64>,
    /// Cluster × true class counts over learned samples.
    pub confusion: Vec<Vec<u64>>,
    /// Explainer prediction vs. expanded label, before learning the sample.
    pub agreement: f64,
    pub bootstrap_samples: u64,
    pub provenance: Option<Provenance>,
    pub cluster_labels: Option<Vec<ClassLabel>>,
    pub tags_delivered: usize,
    pub explainer_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub spec: ScenarioSpec,
    pub metrics: PrequentialMetrics,
    pub log: Vec<LogRecord>,
    pub ops: Vec<Op>,
    /// Samples produced by the feature pipeline.
    pub processed: u64,
    pub learn_calls: u64,
    pub windows: WindowSet,
    pub threshold: f64,
    pub model_digest: String,
    pub unsupervised: Option<UnsupervisedOutcome>,
    /// Time spent in model calls.
    pub model_time_s: f64,
    /// Time for the whole run, feature extraction included.
    pub total_time_s: f64,
}

/// Original sample indices in shuffled order: `n` samples cut into
/// `partitions` contiguous blocks whose order is permuted by `seed`.
pub fn block_order(n: usize, partitions: usize, seed: u64) -> Vec<usize> {
    if partitions <= 1 || n == 0 {
        return (0..n).collect();
    }
    let base = n / partitions;
    let extra = n % partitions;
    let mut blocks = Vec::with_capacity(partitions);
    let mut start = 0;
    for b in 0..partitions {
        let len = base + usize::from(b < extra);
        blocks.push(start..start + len);
        start += len;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_5546);
    blocks.shuffle(&mut rng);
    blocks.into_iter().flatten().collect()
}

/// Simulated judge tags placed after calibration and threshold tuning, where
/// every slot has a cluster assignment to attribute them to.
pub fn simulated_judge(
    stream: &Stream,
    features: &FeatureConfig,
    per_class: usize,
    seed: u64,
) -> Result<Vec<JudgeTag>> {
    let pipeline = FeaturePipeline::new(stream.descriptor.clone(), *features)?;
    let head = pipeline.calibration_slots()
        + if features.threshold.is_some() {
            0
        } else {
            pipeline.tuning_slots()
        };
    let truth: Vec<(u64, ClassLabel)> = stream
        .slots
        .iter()
        .skip(head)
        .filter_map(|s| s.ground_truth.map(|g| (s.n, g)))
        .collect();
    Ok(simulate_tags(
        &truth,
        stream.descriptor.classes.len(),
        per_class,
        0.0,
        seed,
    ))
}

enum Engine {
    Supervised(Box<dyn OnlineModel>),
    Unsupervised(Box<UnsupervisedLoop>),
}

struct Runner {
    engine: Engine,
    acc: MetricsAccumulator,
    log: Vec<LogRecord>,
    ops: Vec<Op>,
    trace: bool,
    learn_calls: u64,
    agree: u64,
    visited: u64,
    bootstrap: u64,
    model_time: Duration,
}

impl Runner {
    fn visit(&mut self, fv: &FeatureVector, truth: Option<ClassLabel>) -> Result<()> {
        let start = Instant::now();
        let (pred, proba, bootstrap) = match &mut self.engine {
            Engine::Supervised(model) => {
                if self.trace {
                    self.ops.push(Op::Predict(fv.n));
                }
                let proba = model.predict_proba_one(fv);
                let pred = proba.label();
                if self.trace {
                    self.ops.push(Op::Learn(fv.n));
                }
                model.learn_one(fv, truth);
                (pred, proba, false)
            }
            Engine::Unsupervised(lp) => {
                if self.trace {
                    self.ops.push(Op::Predict(fv.n));
                    self.ops.push(Op::Learn(fv.n));
                }
                let step = lp.step(fv, truth, true)?;
                self.agree += u64::from(step.proba.label() == step.label);
                let bootstrap = step.source != LabelSource::Tags;
                (step.label, step.proba, bootstrap)
            }
        };
        self.model_time += start.elapsed();
        self.learn_calls += 1;
        self.visited += 1;
        self.bootstrap += u64::from(bootstrap);
        if let Some(t) = truth {
            self.acc.add(t, pred, &proba);
        }
        self.log.push(LogRecord {
            n: fv.n,
            truth,
            pred,
            proba,
            bootstrap,
        });
        Ok(())
    }
}

/// Runs one scenario over a stream: calibration and threshold tuning on the
/// stream head, then predict → score → learn on every `stride`-th sample.
pub fn run_prequential(
    stream: &Stream,
    spec: &ScenarioSpec,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    spec.validate()?;
    let n_classes = stream.descriptor.classes.len();
    if opts.params.n_classes != n_classes {
        return Err(Error::Config(format!(
            "model expects {} classes, stream has {n_classes}",
            opts.params.n_classes
        )));
    }
    let total_start = Instant::now();
    let engine = if spec.id == ScenarioId::D {
        let has_truth = stream.slots.iter().any(|s| s.ground_truth.is_some());
        if opts.tags.is_empty() && !has_truth {
            return Err(Error::Coverage {
                clusters: (0..opts.params.kmeans.n_clusters).collect(),
            });
        }
        let mut lp = UnsupervisedLoop::new(&opts.params, opts.unsupervised)?;
        for tag in &opts.tags {
            lp.add_tag(tag.clone());
        }
        Engine::Unsupervised(Box::new(lp))
    } else {
        let model = opts.registry.create(&spec.model, &opts.params)?;
        if model.is_clusterer() {
            return Err(Error::Config(format!("`{}` is a clusterer", spec.model)));
        }
        Engine::Supervised(model)
    };
    let mut runner = Runner {
        engine,
        acc: MetricsAccumulator::new(n_classes),
        log: Vec::new(),
        ops: Vec::new(),
        trace: opts.trace,
        learn_calls: 0,
        agree: 0,
        visited: 0,
        bootstrap: 0,
        model_time: Duration::ZERO,
    };

    let features = FeatureConfig {
        data: spec.data,
        ..opts.features
    };
    let mut pipeline = FeaturePipeline::new(stream.descriptor.clone(), features)?;
    let head = pipeline.calibration_slots()
        + if features.threshold.is_some() {
            0
        } else {
            pipeline.tuning_slots()
        };
    let expected = stream.len().saturating_sub(head);
    let selected = |pos: usize| (pos + 1) % spec.stride == 0;

    let mut processed = 0usize;
    if spec.partitions == 0 {
        for slot in &stream.slots {
            if let Step::Sample(fv) = pipeline.push(slot)? {
                if selected(processed) {
                    runner.visit(&fv, slot.ground_truth)?;
                }
                processed += 1;
            }
        }
    } else {
        // shuffled position of every selected original sample
        let order = block_order(expected, spec.partitions, opts.seed);
        let mut slot_of = vec![None; expected];
        for (pos, &orig) in order.iter().enumerate() {
            if selected(pos) {
                slot_of[orig] = Some(pos / spec.stride);
            }
        }
        let mut kept: Vec<Option<(FeatureVector, Option<ClassLabel>)>> =
            vec![None; expected / spec.stride];
        for slot in &stream.slots {
            if let Step::Sample(fv) = pipeline.push(slot)? {
                if let Some(Some(i)) = slot_of.get(processed) {
                    kept[*i] = Some((fv, slot.ground_truth));
                }
                processed += 1;
            }
        }
        for (fv, truth) in kept.into_iter().flatten() {
            runner.visit(&fv, truth)?;
        }
    }
    pipeline.finish()?;
    if processed != expected {
        return Err(Error::Config(format!(
            "pipeline produced {processed} samples, expected {expected}"
        )));
    }
    if processed == 0 {
        return Err(Error::EmptyStream(
            "no sample after calibration and tuning".into(),
        ));
    }

    let total_time = total_start.elapsed();
    let mut metrics = runner.acc.summary();
    if opts.timing {
        metrics.preq_time_s = Some(total_time.as_secs_f64());
        metrics.per_sample_ms = Some(total_time.as_secs_f64() * 1e3 / processed as f64);
    }
    let (model_digest, unsupervised) = match &runner.engine {
        Engine::Supervised(model) => (model.digest(), None),
        Engine::Unsupervised(lp) => (
            lp.kmeans().digest(),
            Some(UnsupervisedOutcome {
                oracle_accuracy: lp.oracle_accuracy(),
                confusion: lp.oracle_counts().to_vec(),
                agreement: if runner.visited == 0 {
                    0.0
                } else {
                    runner.agree as f64 / runner.visited as f64
                },
                bootstrap_samples: runner.bootstrap,
                provenance: lp.provenance(),
                cluster_labels: lp.map().map(|m| m.labels.clone()),
                tags_delivered: lp.delivered_tags().len(),
                explainer_digest: lp.explainer().digest(),
            }),
        ),
    };
    let engine = pipeline.engine().expect("pipeline finished");
    Ok(RunOutcome {
        spec: spec.clone(),
        metrics,
        log: runner.log,
        ops: runner.ops,
        processed: processed as u64,
        learn_calls: runner.learn_calls,
        windows: engine.windows(),
        threshold: pipeline.threshold().unwrap_or(0.0),
        model_digest,
        unsupervised,
        model_time_s: runner.model_time.as_secs_f64(),
        total_time_s: total_time.as_secs_f64(),
    })
}
