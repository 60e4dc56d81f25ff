//! Property tests for the core invariants: alias fidelity, walk
//! validity, subgraph idempotence, metric symmetries, split-model
//! invariances, and file round-trips.

use proptest::prelude::*;

use lexlink_core::dataset::{DatasetRow, EdgeDataset};
use lexlink_core::eval::{confusion, metrics};
use lexlink_core::forest::{fit_forest, ForestConfig, MaxFeatures, TreeConfig};
use lexlink_core::graph::{GraphBuilder, NodeType, RelationType, SubgraphFilter, TypedGraph};
use lexlink_core::walk::{generate_walks, AliasTable, Directedness, WalkConfig, WalkGraph};

fn relation_of(code: usize) -> RelationType {
    RelationType::SUBGRAPH_DEFAULT[code % 7].clone()
}

/// Arbitrary small weighted multi-relational graph.
fn graph_strategy() -> impl Strategy<Value = TypedGraph> {
    (2usize..12, proptest::collection::vec((0usize..12, 0usize..12, 0usize..7, 1u32..200), 1..40))
        .prop_map(|(n, raw_edges)| {
            let mut b = GraphBuilder::new();
            for i in 0..n {
                b.add_node(&format!("node{i}"), NodeType::Term, 1.0);
            }
            for (src, dst, rel, w) in raw_edges {
                let (src, dst) = (src % n, dst % n);
                if src != dst {
                    b.add_edge(src as u32, relation_of(rel), dst as u32, f64::from(w));
                }
            }
            b.build()
        })
}

proptest! {
    #[test]
    fn alias_probabilities_match_normalized_weights(
        weights in proptest::collection::vec(0.0f64..100.0, 1..50)
    ) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let table = AliasTable::from_weights(&weights).unwrap();
        let total: f64 = weights.iter().sum();
        for (slot, p) in table.slot_probabilities().iter().enumerate() {
            let expected = weights[slot] / total;
            prop_assert!((p - expected).abs() <= 1e-12,
                "slot {slot}: {p} vs {expected}");
        }
    }

    #[test]
    fn every_walk_step_follows_an_edge(g in graph_strategy(), seed in 0u64..1000) {
        let cfg = WalkConfig { walk_length: 10, seed, ..WalkConfig::default() };
        let corpus = match generate_walks(&g, &cfg, 1) {
            Ok(c) => c,
            Err(_) => return Ok(()), // graph had no edges at all
        };
        let view = WalkGraph::from_graph(&g, Directedness::Undirected);
        for walk in &corpus.walks {
            for pair in walk.windows(2) {
                prop_assert!(view.has_edge(pair[0], pair[1]));
            }
        }
    }

    #[test]
    fn subgraph_selection_is_idempotent(g in graph_strategy(), threshold in 0.0f64..150.0) {
        let filter = SubgraphFilter { min_edge_weight: threshold, ..SubgraphFilter::default() };
        let once = g.select_subgraph(&filter);
        let twice = once.select_subgraph(&filter);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn confusion_counts_are_exhaustive(
        pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200)
    ) {
        let preds: Vec<bool> = pairs.iter().map(|(p, _)| *p).collect();
        let labels: Vec<bool> = pairs.iter().map(|(_, l)| *l).collect();
        let cm = confusion(&preds, &labels).unwrap();
        prop_assert_eq!(cm.total(), pairs.len());
        let m = metrics(&cm);
        if let (Some(p), Some(r), Some(f1)) = (m.precision, m.recall, m.f1) {
            prop_assert!(f1 <= p.max(r) + 1e-12);
            prop_assert!(f1 >= p.min(r) - 1e-12);
        }
    }
}

fn toy_dataset(points: &[([f64; 2], bool)]) -> EdgeDataset {
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, (xy, label))| DatasetRow {
            source_name: format!("s{i}"),
            target_name: format!("t{i}"),
            source_id: i as u32,
            target_id: 500 + i as u32,
            features: xy.to_vec(),
            labels: [*label, false, false, false, false, false],
        })
        .collect();
    EdgeDataset {
        rows,
        feature_dim: 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn affine_feature_rescaling_preserves_predictions(
        points in proptest::collection::vec(
            ((-50.0f64..50.0, -50.0f64..50.0), any::<bool>()), 4..40),
        scale in 0.01f64..10.0,
        shift in -100.0f64..100.0,
    ) {
        let pts: Vec<([f64; 2], bool)> = points
            .iter()
            .map(|((x, y), l)| ([*x, *y], *l))
            .collect();
        prop_assume!(pts.iter().any(|(_, l)| *l) && pts.iter().any(|(_, l)| !*l));

        let ds = toy_dataset(&pts);
        let rescaled: Vec<([f64; 2], bool)> = pts
            .iter()
            .map(|(xy, l)| ([xy[0] * scale + shift, xy[1] * scale + shift], *l))
            .collect();
        let ds2 = toy_dataset(&rescaled);

        let cfg = ForestConfig {
            n_estimators: 5,
            seed: 11,
            tree: TreeConfig { max_features: MaxFeatures::All, ..TreeConfig::default() },
            ..ForestConfig::default()
        };
        let f1 = fit_forest(&ds, &RelationType::Syn, &cfg, 1).unwrap();
        let f2 = fit_forest(&ds2, &RelationType::Syn, &cfg, 1).unwrap();
        for (xy, _) in &pts {
            let mapped = [xy[0] * scale + shift, xy[1] * scale + shift];
            prop_assert_eq!(
                f1.predict_label(xy, 0.5).unwrap(),
                f2.predict_label(&mapped, 0.5).unwrap()
            );
        }
    }

    #[test]
    fn dataset_csv_round_trip(
        rows in proptest::collection::vec(
            (proptest::collection::vec(-10.0f64..10.0, 4),
             proptest::collection::vec(any::<bool>(), 6)),
            1..20)
    ) {
        let ds = EdgeDataset {
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, (feats, labels))| DatasetRow {
                    source_name: format!("src {i}"),
                    target_name: format!("dst,{i}"),
                    source_id: i as u32,
                    target_id: 900 + i as u32,
                    features: feats.clone(),
                    labels: [labels[0], labels[1], labels[2], labels[3], labels[4], labels[5]],
                })
                .collect(),
            feature_dim: 4,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        ds.write_csv(&path).unwrap();
        let loaded = EdgeDataset::read_csv(&path).unwrap();
        prop_assert_eq!(loaded, ds);
    }
}
