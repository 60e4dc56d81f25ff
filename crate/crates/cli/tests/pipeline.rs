//! End-to-end pipeline tests: staged artifacts, manifest chaining,
//! queries, and the binary's exit-code contract.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use lexlink_cli::config::PipelineConfig;
use lexlink_cli::manifest::{read_manifest, verify_chain};
use lexlink_cli::pipeline;
use lexlink_cli::synthetic::{RelationRule, SyntheticSpec};
use lexlink_cli::PipelineError;
use lexlink_core::dataset::EdgeDataset;
use lexlink_core::graph::RelationType;

/// Small, fast benchmark: 4 communities of 20 nodes, modest edge counts.
fn small_rules() -> BTreeMap<RelationType, RelationRule> {
    let mut rules = BTreeMap::new();
    let dense = Some((100.0, 200.0));
    rules.insert(
        RelationType::Syn,
        RelationRule::IntraCommunity {
            edges: 600,
            weight_range: dense,
        },
    );
    rules.insert(
        RelationType::RaffSem,
        RelationRule::IntraCommunity {
            edges: 300,
            weight_range: dense,
        },
    );
    rules.insert(
        RelationType::Isa,
        RelationRule::ChildToParent {
            edges: 200,
            weight_range: None,
        },
    );
    rules.insert(
        RelationType::Hypo,
        RelationRule::Mirror {
            of: RelationType::Isa,
        },
    );
    rules.insert(
        RelationType::Lieu,
        RelationRule::CommunityPairs {
            pairs: vec![(0, 2), (1, 3)],
            edges: 200,
            weight_range: None,
        },
    );
    rules.insert(
        RelationType::Agent,
        RelationRule::CommunityPairs {
            pairs: vec![(2, 0), (3, 1)],
            edges: 200,
            weight_range: None,
        },
    );
    rules.insert(
        RelationType::AgentInv,
        RelationRule::CommunityPairs {
            pairs: vec![(0, 3), (3, 0)],
            edges: 200,
            weight_range: None,
        },
    );
    rules
}

fn small_config(dir: &Path, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        workers: 1,
        ..PipelineConfig::default()
    };
    cfg.paths.nodes = dir.join("nodes.tsv");
    cfg.paths.edges = dir.join("edges.tsv");
    cfg.paths.workdir = dir.join("work");
    cfg.synthetic = SyntheticSpec {
        n_communities: 4,
        nodes_per_community: 20,
        relation_rules: small_rules(),
        ..SyntheticSpec::default()
    };
    cfg.forest.n_estimators = 20;
    cfg.sweep.grid = vec![5, 10];
    cfg
}

fn run_small_pipeline(dir: &Path, seed: u64) -> PipelineConfig {
    let cfg = small_config(dir, seed);
    pipeline::cmd_synth(&cfg).unwrap();
    pipeline::run_all(&cfg).unwrap();
    cfg
}

#[test]
fn full_pipeline_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 7);
    let work = &cfg.paths.workdir;
    for name in [
        pipeline::GRAPH_NODES,
        pipeline::GRAPH_EDGES,
        pipeline::SUBGRAPH_NODES,
        pipeline::SUBGRAPH_EDGES,
        pipeline::WALKS,
        pipeline::EMBEDDINGS,
        pipeline::DATASET,
        pipeline::TRAIN_SET,
        pipeline::TEST_SET,
        "report.json",
        pipeline::TRUTH,
    ] {
        assert!(work.join(name).exists(), "missing artifact {name}");
    }
    for rel in &RelationType::LABELS {
        assert!(work.join(pipeline::model_file_name(rel)).exists());
    }
}

#[test]
fn manifest_forms_a_verified_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 8);
    let records = read_manifest(&cfg.paths.workdir).unwrap();
    let stages: Vec<&str> = records.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(
        stages,
        ["synth", "ingest", "subgraph", "walk", "embed", "dataset", "train", "eval"]
    );
    let violations = verify_chain(&records);
    assert!(violations.is_empty(), "chain violations: {violations:?}");
}

#[test]
fn stage_rerun_reproduces_output_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 9);
    // rerun two stages; their fresh records must show identical hashes
    pipeline::cmd_walk(&cfg).unwrap();
    pipeline::cmd_embed(&cfg).unwrap();
    let records = read_manifest(&cfg.paths.workdir).unwrap();
    let outputs_of = |stage: &str| -> Vec<&BTreeMap<String, String>> {
        records
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| &r.outputs)
            .collect()
    };
    for stage in ["walk", "embed"] {
        let runs = outputs_of(stage);
        assert_eq!(runs.len(), 2, "{stage} should have run twice");
        assert_eq!(runs[0], runs[1], "{stage} rerun changed its outputs");
    }
    assert!(verify_chain(&records).is_empty());
}

#[test]
fn query_on_training_positive_pair_scores_high() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 10);
    let train = EdgeDataset::read_csv(&cfg.paths.workdir.join(pipeline::TRAIN_SET)).unwrap();
    // pick a planted (intra-community) synonymy pair, not a noise edge
    let community = |name: &str| name.split('_').next().unwrap().to_string();
    let row = train
        .rows
        .iter()
        .find(|r| r.labels[0] && community(&r.source_name) == community(&r.target_name))
        .expect("training set has an intra-community positive");
    let pairs = pipeline::cmd_query(&cfg, &row.source_name, &row.target_name).unwrap();
    assert_eq!(pairs.len(), 6);
    assert_eq!(pairs[0].0, RelationType::Syn);
    assert!(
        pairs[0].1 > 0.5,
        "synonymy probability {} for {} -> {}",
        pairs[0].1,
        row.source_name,
        row.target_name
    );
}

#[test]
fn query_unknown_node_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 11);
    match pipeline::cmd_query(&cfg, "no_such_node", "c0_n0") {
        Err(PipelineError::Data(msg)) => assert!(msg.contains("no_such_node")),
        other => panic!("expected data error, got {other:?}"),
    }
}

#[test]
fn missing_upstream_artifact_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 12);
    match pipeline::cmd_walk(&cfg) {
        Err(PipelineError::MissingArtifact { stage, .. }) => assert_eq!(stage, "walk"),
        other => panic!("expected missing artifact, got {other:?}"),
    }
}

#[test]
fn sweep_writes_accuracy_per_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 13);
    pipeline::cmd_sweep(&cfg).unwrap();
    let text = std::fs::read_to_string(cfg.paths.workdir.join(pipeline::SWEEP)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_estimators,accuracy");
    assert_eq!(lines.len(), 1 + cfg.sweep.grid.len());
    assert!(lines[1].starts_with("5,"));
}

// --- binary-level exit code contract ---

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lexlink"))
}

#[test]
fn binary_missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = binary()
        .current_dir(dir.path())
        .args(["--config", "nope.toml", "ingest"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = \"not a number\"").unwrap();
    let status = binary()
        .current_dir(dir.path())
        .args(["--config", "bad.toml", "ingest"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_missing_upstream_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 14);
    std::fs::write(
        dir.path().join("lexlink.toml"),
        toml::to_string(&cfg).unwrap(),
    )
    .unwrap();
    let status = binary()
        .current_dir(dir.path())
        .args(["--config", "lexlink.toml", "walk"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn binary_data_error_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 15);
    std::fs::write(
        dir.path().join("lexlink.toml"),
        toml::to_string(&cfg).unwrap(),
    )
    .unwrap();
    // >10% malformed node lines
    std::fs::write(&cfg.paths.nodes, "a\tn_term\t1\nbroken\n").unwrap();
    std::fs::write(&cfg.paths.edges, "").unwrap();
    let status = binary()
        .current_dir(dir.path())
        .args(["--config", "lexlink.toml", "ingest"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn binary_query_prints_six_relation_probability_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_small_pipeline(dir.path(), 16);
    std::fs::write(
        dir.path().join("lexlink.toml"),
        toml::to_string(&cfg).unwrap(),
    )
    .unwrap();
    let output = binary()
        .current_dir(dir.path())
        .args(["--config", "lexlink.toml", "query", "c0_n0", "c0_n1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 6);
    let expected_order = ["r_syn", "r_isa", "r_hypo", "r_lieu", "r_agent-1", "r_agent"];
    for (line, rel) in lines.iter().zip(expected_order) {
        let (name, proba) = line.split_once('\t').unwrap();
        assert_eq!(name, rel);
        let p: f64 = proba.parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}
