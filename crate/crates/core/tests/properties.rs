use std::collections::BTreeMap;

use nordwatch_core::evaluation::{block_order, ConfusionMatrix};
use nordwatch_core::features::{
    compute_metrics, FeatureKey, Metric, Welford, WindowKind, WindowState,
};
use nordwatch_core::features::{FftPlans, FftScratch};
use nordwatch_core::labeling::{best_mapping, cluster_at};
use nordwatch_core::models::Proba;
use nordwatch_core::stream::{ClassLabel, SensorAddress};
use proptest::prelude::*;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(a.abs()).max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn sliding_window_matches_batch(
        values in prop::collection::vec(prop::option::weighted(0.8, -50.0f64..50.0), 1..300),
        w in 1usize..40,
    ) {
        let mut state = WindowState::new(w);
        let mut plans = FftPlans::default();
        let plan = plans.get(w);
        let mut scratch = FftScratch::default();
        let mut present = Vec::new();
        for v in values {
            state.update(v);
            if let Some(x) = v {
                present.push(x);
            }
            let start = present.len().saturating_sub(w);
            prop_assert_eq!(state.contents(), present[start..].to_vec());
            let got = state.metrics(plan.as_ref(), &mut scratch);
            if present.len() < w {
                prop_assert!(got.is_none());
                continue;
            }
            let want = compute_metrics(&present[start..]).unwrap();
            let got = got.unwrap();
            let scale = present[start..].iter().fold(0.0f64, |s, v| s.max(v.abs()));
            for i in 0..6 {
                prop_assert!(close(got.values[i], want.values[i], scale * w as f64), "{i}: {} vs {}", got.values[i], want.values[i]);
            }
            let mean = present[start..].iter().sum::<f64>() / w as f64;
            prop_assert!(close(got.avg(), mean, scale));
        }
    }

    #[test]
    fn welford_matches_two_pass(values in prop::collection::vec(-1e3f64..1e3, 0..200)) {
        let mut acc = Welford::default();
        for &v in &values {
            acc.update(v);
        }
        if values.len() < 2 {
            prop_assert!(acc.variance().is_none());
        } else {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!(close(acc.variance().unwrap(), var, 1e6));
        }
    }

    #[test]
    fn log_scores_normalize(scores in prop::collection::vec(prop::option::of(-800.0f64..800.0), 1..6)) {
        let p = Proba::from_log_scores(&scores);
        prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.0.iter().all(|v| (0.0..=1.0).contains(v)));
        if scores.iter().any(Option::is_some) {
            for (s, v) in scores.iter().zip(&p.0) {
                if s.is_none() {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn relabelling_clusters_permutes_the_mapping(
        cells in prop::collection::vec(0u64..20, 16),
        perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let m: Vec<Vec<u64>> = cells.chunks(4).map(<[u64]>::to_vec).collect();
        let (map, acc) = best_mapping(&m).unwrap();
        // cluster c of the permuted matrix is cluster perm[c] of the original
        let permuted: Vec<Vec<u64>> = perm.iter().map(|&c| m[c].clone()).collect();
        let (_, acc2) = best_mapping(&permuted).unwrap();
        prop_assert_eq!(acc, acc2);
        let total: u64 = cells.iter().sum();
        let diagonal: u64 = (0..4).map(|i| m[i][i]).sum();
        let hits: u64 = (0..4).map(|c| m[c][map.label(c).index()]).sum();
        prop_assert!(hits >= diagonal);
        if total > 0 {
            prop_assert_eq!(acc, hits as f64 / total as f64);
        }
        let mut labels: Vec<usize> = map.labels.iter().map(|l| l.index()).collect();
        labels.sort_unstable();
        prop_assert_eq!(labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn micro_averages_equal_accuracy(pairs in prop::collection::vec((0u8..3, 0u8..3), 1..300)) {
        let mut m = ConfusionMatrix::new(3);
        for (t, p) in &pairs {
            m.add(ClassLabel(*t), ClassLabel(*p));
        }
        let hits = pairs.iter().filter(|(t, p)| t == p).count() as f64;
        prop_assert!((m.accuracy() - hits / pairs.len() as f64).abs() < 1e-12);
        prop_assert!((m.precision_micro() - m.accuracy()).abs() < 1e-12);
        prop_assert!((m.recall_micro() - m.accuracy()).abs() < 1e-12);
    }

    #[test]
    fn macro_averages_ignore_class_names(
        pairs in prop::collection::vec((0u8..3, 0u8..3), 1..300),
        perm in Just(vec![0u8, 1, 2]).prop_shuffle(),
    ) {
        let mut a = ConfusionMatrix::new(3);
        let mut b = ConfusionMatrix::new(3);
        for (t, p) in &pairs {
            a.add(ClassLabel(*t), ClassLabel(*p));
            b.add(ClassLabel(perm[*t as usize]), ClassLabel(perm[*p as usize]));
        }
        prop_assert!((a.precision_macro() - b.precision_macro()).abs() < 1e-12);
        prop_assert!((a.recall_macro() - b.recall_macro()).abs() < 1e-12);
        for c in 0..3 {
            prop_assert!((a.recall(c) - b.recall(perm[c] as usize)).abs() < 1e-12);
        }
    }

    #[test]
    fn block_order_is_a_block_permutation(n in 0usize..500, partitions in 0usize..12, seed in any::<u64>()) {
        let order = block_order(n, partitions, seed);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let breaks = order.windows(2).filter(|w| w[1] != w[0] + 1).count();
        prop_assert!(breaks < partitions.max(1));
    }

    #[test]
    fn cluster_at_is_latest_assignment_at_or_before(
        entries in prop::collection::btree_map(0u64..1000, 0usize..3, 0..40),
        slot in 0u64..1100,
    ) {
        let want = entries.iter().filter(|(n, _)| **n <= slot).last().map(|(_, c)| *c);
        prop_assert_eq!(cluster_at(&entries, slot), want);
    }

    #[test]
    fn feature_keys_round_trip_through_text(a in 0usize..54, m in 0usize..7, w in 0usize..4) {
        let address = SensorAddress::nordic_set()[a];
        let key = if m == 6 {
            FeatureKey::raw(address)
        } else {
            FeatureKey::engineered(Metric::ENGINEERED[m], WindowKind::ALL[w], address)
        };
        let text = key.to_string();
        prop_assert_eq!(text.parse::<FeatureKey>().unwrap(), key);
        let json = serde_json::to_string(&key).unwrap();
        prop_assert_eq!(serde_json::from_str::<FeatureKey>(&json).unwrap(), key);
    }
}

#[test]
fn empty_assignments_resolve_nothing() {
    assert_eq!(cluster_at(&BTreeMap::new(), 10), None);
}
