use nordwatch_core::features::{FeatureKey, FeatureVector, Metric, WindowKind};
use nordwatch_core::labeling::{best_mapping, confusion};
use nordwatch_core::models::{
    Arfc, ArfcConfig, GaussianNb, HatcConfig, HoeffdingTree, KMeans, KMeansConfig, ModelParams,
    ModelRegistry, OnlineModel, VAR_FLOOR,
};
use nordwatch_core::stream::{ClassLabel, SensorAddress};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn keys(n: usize) -> Vec<FeatureKey> {
    let addresses = SensorAddress::nordic_set();
    (0..n)
        .map(|i| FeatureKey::engineered(Metric::Avg, WindowKind::Q2, addresses[i]))
        .collect()
}

fn fv(n: u64, keys: &[FeatureKey], values: &[Option<f64>]) -> FeatureVector {
    FeatureVector::new(
        n,
        n as f64,
        keys.iter()
            .zip(values)
            .filter_map(|(k, v)| v.map(|v| (*k, v)))
            .collect(),
    )
}

fn log_normal_pdf(x: f64, values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    }
    .max(VAR_FLOOR);
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

#[test]
fn gaussian_nb_matches_closed_form_posterior() {
    let k = keys(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut model = GaussianNb::new(3);
    // per class, per key: observed values
    let mut seen: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); 2]; 3];
    let mut counts = [0.0; 3];
    for n in 0..300 {
        let c = rng.random_range(0..3usize);
        let mut values = [
            Some(c as f64 + rng.random::<f64>()),
            Some(2.0 * c as f64 - rng.random::<f64>()),
        ];
        // key 1 is never observed for class 2
        if c == 2 || rng.random_bool(0.1) {
            values[1] = None;
        }
        for (j, v) in values.iter().enumerate() {
            if let Some(v) = v {
                seen[c][j].push(*v);
            }
        }
        counts[c] += 1.0;
        model.learn_one(&fv(n, &k, &values), Some(ClassLabel(c as u8)));
    }
    let total: f64 = counts.iter().sum();
    for x in [[0.5, 0.2], [1.4, 1.9], [2.6, 3.0], [-1.0, 9.0]] {
        let sample = fv(0, &k, &[Some(x[0]), Some(x[1])]);
        let got = model.predict_proba_one(&sample);
        let scores: Vec<f64> = (0..3)
            .map(|c| {
                let mut s = (counts[c] / total).ln();
                for j in 0..2 {
                    if !seen[c][j].is_empty() {
                        s += log_normal_pdf(x[j], &seen[c][j]);
                    }
                }
                s
            })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        for c in 0..3 {
            let want = (scores[c] - max).exp() / z;
            assert!(
                (got.0[c] - want).abs() < 1e-9,
                "{x:?} class {c}: {} vs {want}",
                got.0[c]
            );
        }
    }
}

#[test]
fn gaussian_nb_without_training_is_uniform_and_skips_unlabelled() {
    let k = keys(1);
    let mut model = GaussianNb::new(3);
    model.learn_one(&fv(0, &k, &[Some(1.0)]), None);
    assert_eq!(model.class_counts(), &[0.0, 0.0, 0.0]);
    let p = model.predict_proba_one(&fv(0, &k, &[Some(1.0)]));
    assert!(p.0.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
}

fn threshold_stream(seed: u64, len: usize) -> Vec<(FeatureVector, ClassLabel)> {
    let k = keys(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|n| {
            let x: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let label = ClassLabel(u8::from(x[1] > 0.4) + u8::from(x[1] > 0.4 && x[2] > 0.5));
            (fv(n as u64, &k, &x.map(Some)), label)
        })
        .collect()
}

fn prequential_accuracy(
    model: &mut dyn OnlineModel,
    data: &[(FeatureVector, ClassLabel)],
    skip: usize,
) -> f64 {
    let mut hits = 0;
    for (i, (x, y)) in data.iter().enumerate() {
        let p = model.predict_one(x);
        if i >= skip && p == *y {
            hits += 1;
        }
        model.learn_one(x, Some(*y));
    }
    hits as f64 / (data.len() - skip) as f64
}

#[test]
fn hoeffding_tree_learns_axis_aligned_concept() {
    let data = threshold_stream(1, 6000);
    let mut tree = HoeffdingTree::new(3, HatcConfig::default());
    let acc = prequential_accuracy(&mut tree, &data, 3000);
    assert!(acc > 0.95, "accuracy {acc}");
    assert!(tree.depth() >= 2, "depth {}", tree.depth());
    let path = tree.decision_path(&data[0].0);
    assert!(!path.steps.is_empty());
}

#[test]
fn forest_of_one_unsampled_tree_degenerates_to_the_tree() {
    let data = threshold_stream(2, 3000);
    let config = ArfcConfig {
        models: 1,
        features: usize::MAX,
        resample: false,
        ..ArfcConfig::default()
    };
    let mut forest = Arfc::new(3, config, HatcConfig::default(), 9);
    let mut tree = HoeffdingTree::new(3, HatcConfig::default());
    for (x, y) in &data {
        let (pf, pt) = (forest.predict_proba_one(x), tree.predict_proba_one(x));
        assert_eq!(pf.label(), pt.label());
        assert!(
            pf.0.iter().zip(&pt.0).all(|(a, b)| (a - b).abs() < 1e-12),
            "{pf:?} vs {pt:?}"
        );
        forest.learn_one(x, Some(*y));
        tree.learn_one(x, Some(*y));
    }
    assert_eq!(forest.trees()[0].n_nodes(), tree.n_nodes());
}

#[test]
fn forest_learns_and_is_seed_deterministic() {
    let data = threshold_stream(4, 4000);
    let params = ModelParams::new(3, 5);
    let registry = ModelRegistry::default();
    let mut a = registry.create("arfc", &params).unwrap();
    let mut b = registry.create("arfc", &params).unwrap();
    let acc = prequential_accuracy(a.as_mut(), &data, 2000);
    prequential_accuracy(b.as_mut(), &data, 2000);
    assert!(acc > 0.9, "accuracy {acc}");
    assert_eq!(a.digest(), b.digest());
    let mut c = registry.create("arfc", &ModelParams::new(3, 6)).unwrap();
    prequential_accuracy(c.as_mut(), &data, 2000);
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn kmeans_recovers_separated_blobs() {
    let k = keys(2);
    let centers = [[0.0, 0.0], [4.0, 4.0], [-4.0, 4.0]];
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = KMeansConfig {
        n_clusters: 3,
        halflife: 0.1,
        mu: 1.0,
        sigma: 3.0,
        p: 2.0,
    };
    let mut model = KMeans::new(config, 2).unwrap();
    let mut assigned = Vec::new();
    let mut truth = Vec::new();
    for n in 0..3000u64 {
        let c = rng.random_range(0..3usize);
        let x = [
            centers[c][0] + noise.sample(&mut rng),
            centers[c][1] + noise.sample(&mut rng),
        ];
        let a = model.learn_predict(&fv(n, &k, &x.map(Some)));
        if n >= 1000 {
            assigned.push(a);
            truth.push(ClassLabel(c as u8));
        }
    }
    let (_, acc) = best_mapping(&confusion(&assigned, &truth, 3, 3)).unwrap();
    assert!(acc > 0.99, "mapped accuracy {acc}");
}

#[test]
fn kmeans_rejects_degenerate_configuration() {
    assert!(KMeans::new(KMeansConfig::nordic(1), 0).is_err());
    let bad_p = KMeansConfig {
        p: 0.0,
        ..KMeansConfig::nordic(3)
    };
    assert!(KMeans::new(bad_p, 0).is_err());
}

#[test]
fn registry_lists_models_on_unknown_name() {
    let registry = ModelRegistry::default();
    let names: Vec<&str> = registry.names().collect();
    assert_eq!(names, vec!["arfc", "gnb", "hatc", "kmeans"]);
    let err = registry
        .create("svm", &ModelParams::new(3, 0))
        .unwrap_err()
        .to_string();
    assert!(err.contains("svm") && err.contains("gnb"), "{err}");
    for name in names {
        let m = registry.create(name, &ModelParams::new(3, 0)).unwrap();
        assert_eq!(m.name(), name);
        assert_eq!(m.n_classes(), 3);
    }
}
