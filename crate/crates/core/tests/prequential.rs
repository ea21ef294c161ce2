use nordwatch_core::evaluation::{
    run_prequential, simulated_judge, Dataset, Op, RunOptions, ScenarioId, ScenarioSpec,
};
use nordwatch_core::features::{DataKind, Step};
use nordwatch_core::labeling::{JudgeMode, Provenance};
use nordwatch_core::models::ModelParams;
use nordwatch_core::session::{LabelSource, Session, SessionConfig};
use nordwatch_core::stream::synthetic::{
    generate_synthetic, proportional_schedule, SyntheticConfig,
};
use nordwatch_core::stream::{ClassLabel, Stream};
use nordwatch_core::Error;

fn stream(seed: u64) -> Stream {
    generate_synthetic(&SyntheticConfig::new(seed, proportional_schedule(240.0, 2))).unwrap()
}

fn spec(id: ScenarioId, model: &str) -> ScenarioSpec {
    ScenarioSpec::new(id, DataKind::Engineered, model, Dataset::Synthetic).unwrap()
}

fn traced(params: ModelParams) -> RunOptions {
    let mut opts = RunOptions::new(params);
    opts.trace = true;
    opts
}

fn tags_for(stream: &Stream, seed: u64) -> Vec<nordwatch_core::labeling::JudgeTag> {
    simulated_judge(stream, &Default::default(), 5, seed).unwrap()
}

#[test]
fn each_sample_is_predicted_before_it_is_learned() {
    let s = stream(1);
    let out = run_prequential(
        &s,
        &spec(ScenarioId::A, "hatc"),
        &traced(ModelParams::new(3, 1)),
    )
    .unwrap();
    assert_eq!(out.ops.len() as u64, 2 * out.learn_calls);
    let mut last = None;
    for pair in out.ops.chunks(2) {
        match pair {
            [Op::Predict(a), Op::Learn(b)] => {
                assert_eq!(a, b);
                assert!(last.is_none_or(|l| *a > l));
                last = Some(*a);
            }
            other => panic!("unexpected ops {other:?}"),
        }
    }
}

#[test]
fn stride_decimates_the_processed_samples() {
    let s = stream(2);
    for stride in [1, 7, 10, 100] {
        let spec = spec(ScenarioId::A, "gnb").with_stride(stride).unwrap();
        let out = run_prequential(&s, &spec, &RunOptions::new(ModelParams::new(3, 2))).unwrap();
        assert_eq!(
            out.learn_calls,
            out.processed / stride as u64,
            "stride {stride}"
        );
        assert_eq!(out.log.len() as u64, out.learn_calls);
        assert_eq!(out.metrics.samples, out.learn_calls);
    }
}

#[test]
fn processed_count_excludes_calibration_and_tuning() {
    let s = stream(3);
    let out = run_prequential(
        &s,
        &spec(ScenarioId::A, "gnb"),
        &RunOptions::new(ModelParams::new(3, 3)),
    )
    .unwrap();
    // 90 s calibration and 60 s tuning at the 25 Hz master rate
    assert_eq!(out.processed as usize, s.len() - 2250 - 1500);
    assert!(out.threshold > 0.0);
}

#[test]
fn shuffled_scenarios_visit_distinct_samples_out_of_order() {
    let s = stream(4);
    for id in [ScenarioId::B, ScenarioId::C] {
        let sp = spec(id, "gnb");
        let out = run_prequential(&s, &sp, &traced(ModelParams::new(3, 4))).unwrap();
        let ns: Vec<u64> = out.log.iter().map(|r| r.n).collect();
        let mut sorted = ns.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), ns.len(), "{id}: duplicate samples");
        assert_ne!(sorted, ns, "{id}: order unchanged");
        assert_eq!(out.learn_calls, out.processed / sp.stride as u64);
    }
}

#[test]
fn metrics_are_consistent_with_the_log() {
    let s = stream(5);
    let out = run_prequential(
        &s,
        &spec(ScenarioId::A, "arfc"),
        &RunOptions::new(ModelParams::new(3, 5)),
    )
    .unwrap();
    let hits = out.log.iter().filter(|r| r.truth == Some(r.pred)).count() as f64;
    assert!((out.metrics.accuracy - hits / out.log.len() as f64).abs() < 1e-12);
    let ce: f64 = out
        .log
        .iter()
        .map(|r| -r.proba.get(r.truth.unwrap()).max(1e-12).ln())
        .sum::<f64>()
        / out.log.len() as f64;
    assert!((out.metrics.crloss - ce).abs() < 1e-9);
    assert!(out.metrics.per_sample_ms.is_none());
}

#[test]
fn scenario_d_needs_tags_or_ground_truth() {
    let mut s = stream(6);
    for slot in &mut s.slots {
        slot.ground_truth = None;
    }
    let err = run_prequential(
        &s,
        &spec(ScenarioId::D, "kmeans"),
        &RunOptions::new(ModelParams::new(3, 6)),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Coverage { .. }), "{err}");
}

#[test]
fn scenario_d_reports_tag_provenance() {
    let s = stream(7);
    let mut opts = RunOptions::new(ModelParams::new(3, 7));
    opts.tags = tags_for(&s, 7);
    let out = run_prequential(&s, &spec(ScenarioId::D, "kmeans"), &opts).unwrap();
    let u = out.unsupervised.unwrap();
    assert_eq!(u.provenance, Some(Provenance::JudgeTags));
    assert_eq!(u.tags_delivered, 15);
    assert_eq!(u.confusion.iter().flatten().sum::<u64>(), out.learn_calls);
    assert!(u.bootstrap_samples < out.learn_calls);
    assert!(
        out.metrics.accuracy > 0.8,
        "accuracy {}",
        out.metrics.accuracy
    );
}

#[test]
fn clusterers_are_rejected_outside_scenario_d() {
    let bad = ScenarioSpec::new(
        ScenarioId::A,
        DataKind::Engineered,
        "kmeans",
        Dataset::Synthetic,
    );
    assert!(matches!(bad, Err(Error::Config(_))));
    let raw_d =
        ScenarioSpec::new(ScenarioId::D, DataKind::Raw, "gnb", Dataset::Synthetic).unwrap_err();
    let msg = raw_d.to_string();
    assert!(
        msg.contains("engineered") && msg.contains("kmeans"),
        "{msg}"
    );
}

#[test]
fn session_runs_phases_and_accepts_live_tags() {
    let s = stream(8);
    let mut session = Session::new(s.descriptor.clone(), SessionConfig::new(3, 8)).unwrap();
    let mut phases = Vec::new();
    let mut learned = 0;
    let mut first_sample = None;
    for slot in &s.slots {
        let step = session.push(slot).unwrap();
        if phases.last() != Some(&step.phase) {
            phases.push(step.phase);
        }
        if let Some(p) = &step.prediction {
            learned += usize::from(p.learned);
            if first_sample.is_none() {
                first_sample = Some(p.n);
            }
            assert!((p.proba.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        if slot.n == 5000 {
            let tag = session.add_tag(ClassLabel(1), None, "judge").unwrap();
            assert_eq!(tag.slot, 5000);
        }
    }
    let names: Vec<String> = phases.iter().map(|p| format!("{p:?}")).collect();
    assert_eq!(names, vec!["Calibrating", "Tuning", "Running"]);
    assert!(learned > 0);
    assert!(session.add_tag(ClassLabel(7), None, "judge").is_err());
    let m = session.metrics();
    assert_eq!(m.slots, s.len() as u64);
    assert_eq!(m.tags_delivered, 1);
    assert!(session.explain().is_some());
}

#[test]
fn correct_only_tags_cover_every_cluster() {
    let s = stream(9);
    let mut opts = RunOptions::new(ModelParams::new(3, 9));
    opts.unsupervised.mode = JudgeMode::CorrectOnly;
    opts.tags = tags_for(&s, 9)
        .into_iter()
        .filter(|t| t.label == ClassLabel(0))
        .collect();
    let out = run_prequential(&s, &spec(ScenarioId::D, "kmeans"), &opts).unwrap();
    let u = out.unsupervised.unwrap();
    assert_eq!(u.provenance, Some(Provenance::JudgeTags));
    assert_eq!(
        u.cluster_labels
            .unwrap()
            .iter()
            .filter(|l| **l == ClassLabel(0))
            .count(),
        1
    );
}

#[test]
fn label_sources_serialize_in_snake_case() {
    assert_eq!(
        serde_json::to_string(&LabelSource::Bootstrap).unwrap(),
        "\"bootstrap\""
    );
    let _ = Step::Calibrating;
}
