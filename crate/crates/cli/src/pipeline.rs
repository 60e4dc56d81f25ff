//! Staged pipeline execution. Every stage reads its upstream artifacts
//! from the workdir, writes its own, and appends a manifest record with
//! input/output hashes, its seed, and duration. Stages are rerunnable;
//! reruns with unchanged inputs and seeds reproduce identical artifacts
//! in single-worker mode.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lexlink_core::dataset::{build_dataset, split, EdgeDataset};
use lexlink_core::embedding::{train_embeddings, EmbeddingMatrix};
use lexlink_core::eval::{
    confusion, macro_average, metrics, render_report, MacroMetrics, Metrics, MetricsReport,
    ReportFormat, ReportMetadata,
};
use lexlink_core::forest::{accuracy_on, fit_forest, sweep_n_estimators, Forest};
use lexlink_core::graph::{ingest_graph, RelationType, TypedGraph};
use lexlink_core::walk::{generate_walks, read_walk_file};

use crate::config::PipelineConfig;
use crate::error::PipelineError;
use crate::manifest::{append_record, sha256_hex_file, StageRecord};
use crate::synthetic::generate_files;

pub const GRAPH_NODES: &str = "graph.nodes.tsv";
pub const GRAPH_EDGES: &str = "graph.edges.tsv";
pub const SUBGRAPH_NODES: &str = "subgraph.nodes.tsv";
pub const SUBGRAPH_EDGES: &str = "subgraph.edges.tsv";
pub const WALKS: &str = "walks.txt";
pub const EMBEDDINGS: &str = "embeddings.txt";
pub const DATASET: &str = "dataset.csv";
pub const TRAIN_SET: &str = "train.csv";
pub const TEST_SET: &str = "test.csv";
pub const SWEEP: &str = "sweep.csv";
pub const TRUTH: &str = "truth.tsv";

pub fn model_file_name(rel: &RelationType) -> String {
    format!("model_{rel}.json")
}

pub fn report_file_name(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Table => "report.txt",
        ReportFormat::Csv => "report.csv",
        ReportFormat::Json => "report.json",
    }
}

/// Tracks one stage run and emits its manifest record.
struct Stage<'a> {
    name: &'static str,
    cfg: &'a PipelineConfig,
    seed: u64,
    started: Instant,
    inputs: BTreeMap<String, String>,
}

impl<'a> Stage<'a> {
    fn begin(
        name: &'static str,
        cfg: &'a PipelineConfig,
        seed: u64,
        inputs: &[PathBuf],
    ) -> Result<Self, PipelineError> {
        let mut hashed = BTreeMap::new();
        for path in inputs {
            if !path.exists() {
                return Err(PipelineError::MissingArtifact {
                    stage: name.to_string(),
                    path: path.display().to_string(),
                });
            }
            hashed.insert(file_key(path), sha256_hex_file(path)?);
        }
        Ok(Stage {
            name,
            cfg,
            seed,
            started: Instant::now(),
            inputs: hashed,
        })
    }

    fn finish(self, outputs: &[PathBuf]) -> Result<(), PipelineError> {
        let mut hashed = BTreeMap::new();
        for path in outputs {
            hashed.insert(file_key(path), sha256_hex_file(path)?);
        }
        std::fs::create_dir_all(&self.cfg.paths.workdir)?;
        append_record(
            &self.cfg.paths.workdir,
            &StageRecord {
                stage: self.name.to_string(),
                seed: self.seed,
                duration_ms: self.started.elapsed().as_millis() as u64,
                inputs: self.inputs,
                outputs: hashed,
            },
        )
    }
}

/// Manifest key for a path: file name only, since all artifacts live in
/// one workdir and inputs may come from outside it.
fn file_key(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn workpath(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.workdir.join(name)
}

fn ensure_workdir(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&cfg.paths.workdir)?;
    Ok(())
}

/// Generates the synthetic benchmark graph at the configured input
/// paths, plus the ground-truth table in the workdir.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let spec = cfg.effective_synthetic();
    let stage = Stage::begin("synth", cfg, spec.seed, &[])?;
    let truth = workpath(cfg, TRUTH);
    generate_files(&spec, &cfg.paths.nodes, &cfg.paths.edges, &truth)
        .map_err(PipelineError::Data)?;
    stage.finish(&[cfg.paths.nodes.clone(), cfg.paths.edges.clone(), truth])
}

/// Parses and validates the input graph, writing the canonical
/// serialization into the workdir.
pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let stage = Stage::begin(
        "ingest",
        cfg,
        cfg.seed,
        &[cfg.paths.nodes.clone(), cfg.paths.edges.clone()],
    )?;
    let (graph, report) = ingest_graph(&cfg.paths.nodes, &cfg.paths.edges)?;
    for issue in report.issues.iter().take(20) {
        eprintln!(
            "ingest: {:?} line {}: {}",
            issue.file, issue.line, issue.reason
        );
    }
    eprintln!(
        "ingest: {} nodes ({} rejected), {} edge records ({} rejected), |V|={} |E|={}",
        report.nodes_accepted,
        report.nodes_rejected,
        report.edges_accepted,
        report.edges_rejected,
        graph.node_count(),
        graph.edge_count()
    );
    let nodes_out = workpath(cfg, GRAPH_NODES);
    let edges_out = workpath(cfg, GRAPH_EDGES);
    graph.write_files(&nodes_out, &edges_out)?;
    stage.finish(&[nodes_out, edges_out])
}

fn load_graph(
    cfg: &PipelineConfig,
    stage: &'static str,
    nodes: &str,
    edges: &str,
) -> Result<TypedGraph, PipelineError> {
    let nodes_path = workpath(cfg, nodes);
    let edges_path = workpath(cfg, edges);
    for p in [&nodes_path, &edges_path] {
        if !p.exists() {
            return Err(PipelineError::MissingArtifact {
                stage: stage.to_string(),
                path: p.display().to_string(),
            });
        }
    }
    let (graph, _) = ingest_graph(&nodes_path, &edges_path)?;
    Ok(graph)
}

/// Applies the node-type / relation-type / weight filter.
pub fn cmd_subgraph(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let stage = Stage::begin(
        "subgraph",
        cfg,
        cfg.seed,
        &[workpath(cfg, GRAPH_NODES), workpath(cfg, GRAPH_EDGES)],
    )?;
    let graph = load_graph(cfg, "subgraph", GRAPH_NODES, GRAPH_EDGES)?;
    let sub = graph.select_subgraph(&cfg.subgraph.to_filter());
    eprintln!(
        "subgraph: kept |V|={} |E|={} of |V|={} |E|={}",
        sub.node_count(),
        sub.edge_count(),
        graph.node_count(),
        graph.edge_count()
    );
    let nodes_out = workpath(cfg, SUBGRAPH_NODES);
    let edges_out = workpath(cfg, SUBGRAPH_EDGES);
    sub.write_files(&nodes_out, &edges_out)?;
    stage.finish(&[nodes_out, edges_out])
}

/// Generates the walk corpus over the selected subgraph.
pub fn cmd_walk(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let walk_cfg = cfg.effective_walk();
    let stage = Stage::begin(
        "walk",
        cfg,
        walk_cfg.seed,
        &[workpath(cfg, SUBGRAPH_NODES), workpath(cfg, SUBGRAPH_EDGES)],
    )?;
    let graph = load_graph(cfg, "walk", SUBGRAPH_NODES, SUBGRAPH_EDGES)?;
    let corpus = generate_walks(&graph, &walk_cfg, cfg.workers)?;
    eprintln!("walk: {} walks", corpus.walks.len());
    let out = workpath(cfg, WALKS);
    corpus.write_file(&graph, &out)?;
    stage.finish(&[out])
}

/// Trains embeddings from the walk corpus file.
pub fn cmd_embed(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let sgns_cfg = cfg.effective_sgns();
    let stage = Stage::begin("embed", cfg, sgns_cfg.seed, &[workpath(cfg, WALKS)])?;
    let walks = read_walk_file(&workpath(cfg, WALKS))?;
    let matrix = train_embeddings(&walks, &sgns_cfg, cfg.workers)?;
    eprintln!(
        "embed: {} vectors of dim {}",
        matrix.vocab_len(),
        matrix.dim()
    );
    let out = workpath(cfg, EMBEDDINGS);
    matrix.write_file(&out)?;
    stage.finish(&[out])
}

/// Builds the labeled edge dataset and the train/test split.
pub fn cmd_dataset(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let split_cfg = cfg.effective_split();
    let stage = Stage::begin(
        "dataset",
        cfg,
        split_cfg.seed,
        &[
            workpath(cfg, SUBGRAPH_NODES),
            workpath(cfg, SUBGRAPH_EDGES),
            workpath(cfg, EMBEDDINGS),
        ],
    )?;
    let graph = load_graph(cfg, "dataset", SUBGRAPH_NODES, SUBGRAPH_EDGES)?;
    let embeddings = EmbeddingMatrix::read_file(&workpath(cfg, EMBEDDINGS))?;
    let dataset = build_dataset(&graph, &embeddings, cfg.dataset.min_label_weight)?;
    let outcome = split(&dataset, &split_cfg)?;
    if split_cfg.stratify_on.is_some() && !outcome.stratified {
        eprintln!("dataset: stratification impossible, fell back to a plain random split");
    }
    eprintln!(
        "dataset: {} rows ({} train / {} test), {} features",
        dataset.len(),
        outcome.train.len(),
        outcome.test.len(),
        dataset.feature_dim
    );
    let all_out = workpath(cfg, DATASET);
    let train_out = workpath(cfg, TRAIN_SET);
    let test_out = workpath(cfg, TEST_SET);
    dataset.write_csv(&all_out)?;
    outcome.train.write_csv(&train_out)?;
    outcome.test.write_csv(&test_out)?;
    stage.finish(&[all_out, train_out, test_out])
}

/// Fits one forest per predictable relation on the training split.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let stage = Stage::begin("train", cfg, cfg.seed, &[workpath(cfg, TRAIN_SET)])?;
    let train = EdgeDataset::read_csv(&workpath(cfg, TRAIN_SET))?;
    let mut outputs = Vec::new();
    for rel in &RelationType::LABELS {
        let forest_cfg = cfg.effective_forest(rel);
        let forest = fit_forest(&train, rel, &forest_cfg, cfg.workers)?;
        if forest.single_class {
            eprintln!("train: {rel} had a single training class");
        }
        let out = workpath(cfg, &model_file_name(rel));
        forest.write_file(&out)?;
        outputs.push(out);
    }
    eprintln!(
        "train: {} forests of {} trees",
        RelationType::LABELS.len(),
        cfg.forest.n_estimators
    );
    stage.finish(&outputs)
}

fn load_forests(cfg: &PipelineConfig, stage: &str) -> Result<Vec<Forest>, PipelineError> {
    RelationType::LABELS
        .iter()
        .map(|rel| {
            let path = workpath(cfg, &model_file_name(rel));
            if !path.exists() {
                return Err(PipelineError::MissingArtifact {
                    stage: stage.to_string(),
                    path: path.display().to_string(),
                });
            }
            Ok(Forest::read_file(&path)?)
        })
        .collect()
}

/// Evaluates the six models on the test split and writes the report.
pub fn cmd_eval(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let mut inputs = vec![
        workpath(cfg, TRAIN_SET),
        workpath(cfg, TEST_SET),
        workpath(cfg, DATASET),
    ];
    inputs.extend(
        RelationType::LABELS
            .iter()
            .map(|rel| workpath(cfg, &model_file_name(rel))),
    );
    let stage = Stage::begin("eval", cfg, cfg.seed, &inputs)?;

    let train = EdgeDataset::read_csv(&workpath(cfg, TRAIN_SET))?;
    let test = EdgeDataset::read_csv(&workpath(cfg, TEST_SET))?;
    let forests = load_forests(cfg, "eval")?;
    let report = evaluate(cfg, &forests, &train, &test)?;

    let out = workpath(cfg, report_file_name(cfg.report.format));
    std::fs::write(&out, render_report(&report, cfg.report.format))?;
    if let Some(f1) = report.macro_.f1 {
        eprintln!("eval: macro F1 {f1:.4}");
    }
    stage.finish(&[out])
}

/// Builds the metrics report for fitted forests on a test set.
pub fn evaluate(
    cfg: &PipelineConfig,
    forests: &[Forest],
    train: &EdgeDataset,
    test: &EdgeDataset,
) -> Result<MetricsReport, PipelineError> {
    let threshold = cfg.report.threshold;
    let mut matrices = Vec::with_capacity(forests.len());
    let mut baseline_rows: Vec<(RelationType, Metrics)> = Vec::new();
    for forest in forests {
        let slot = forest
            .relation
            .label_index()
            .expect("fitted forests target label relations");
        let labels: Vec<bool> = test.rows.iter().map(|r| r.labels[slot]).collect();
        let mut preds = Vec::with_capacity(test.rows.len());
        for row in &test.rows {
            preds.push(forest.predict_label(&row.features, threshold)?);
        }
        matrices.push((forest.relation.clone(), confusion(&preds, &labels)?));

        let always_positive = vec![true; labels.len()];
        baseline_rows.push((
            forest.relation.clone(),
            metrics(&confusion(&always_positive, &labels)?),
        ));
    }
    let baseline = macro_average(&baseline_rows).unwrap_or(MacroMetrics {
        recall: None,
        precision: None,
        f1: None,
    });

    let metadata = ReportMetadata {
        seed: cfg.seed,
        workers: cfg.workers,
        decision_threshold: threshold,
        n_estimators: cfg.forest.n_estimators,
        train_rows: train.len(),
        test_rows: test.len(),
        dataset_fingerprint: sha256_hex_file(&workpath(cfg, DATASET)).unwrap_or_default(),
        config_fingerprint: cfg.fingerprint(),
        baseline_always_positive: baseline,
    };
    Ok(MetricsReport::from_confusions(&matrices, metadata)?)
}

/// Runs the n_estimators sweep for the configured relation and writes
/// `sweep.csv` (`n_estimators,accuracy`).
pub fn cmd_sweep(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    ensure_workdir(cfg)?;
    let sweep_seed = cfg.stage_seed("sweep");
    let stage = Stage::begin(
        "sweep",
        cfg,
        sweep_seed,
        &[workpath(cfg, TRAIN_SET), workpath(cfg, TEST_SET)],
    )?;
    let train = EdgeDataset::read_csv(&workpath(cfg, TRAIN_SET))?;
    let test = EdgeDataset::read_csv(&workpath(cfg, TEST_SET))?;
    let base = lexlink_core::forest::ForestConfig {
        seed: sweep_seed,
        ..cfg.forest.clone()
    };
    let results = sweep_n_estimators(
        &train,
        &test,
        &cfg.sweep.relation,
        &cfg.sweep.grid,
        &base,
        cfg.workers,
    )?;
    let mut text = String::from("n_estimators,accuracy\n");
    for (n, acc) in &results {
        text.push_str(&format!("{n},{acc}\n"));
        eprintln!("sweep: n_estimators={n} accuracy={acc:.4}");
    }
    let out = workpath(cfg, SWEEP);
    std::fs::write(&out, text)?;
    stage.finish(&[out])
}

/// Probability of each predictable relation holding from `a` to `b`.
pub fn cmd_query(
    cfg: &PipelineConfig,
    source: &str,
    target: &str,
) -> Result<Vec<(RelationType, f64)>, PipelineError> {
    let mut inputs = vec![workpath(cfg, EMBEDDINGS)];
    inputs.extend(
        RelationType::LABELS
            .iter()
            .map(|rel| workpath(cfg, &model_file_name(rel))),
    );
    for p in &inputs {
        if !p.exists() {
            return Err(PipelineError::MissingArtifact {
                stage: "query".to_string(),
                path: p.display().to_string(),
            });
        }
    }
    let embeddings = EmbeddingMatrix::read_file(&workpath(cfg, EMBEDDINGS))?;
    let vector_of = |name: &str| -> Result<&[f64], PipelineError> {
        embeddings
            .vector(name)
            .ok_or_else(|| PipelineError::Data(format!("unknown node {name:?}")))
    };
    let mut features = vector_of(source)?.to_vec();
    features.extend_from_slice(vector_of(target)?);

    let forests = load_forests(cfg, "query")?;
    let mut pairs = Vec::with_capacity(forests.len());
    for forest in &forests {
        pairs.push((forest.relation.clone(), forest.predict_proba(&features)?));
    }
    Ok(pairs)
}

/// Convenience: ingest through eval in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    cmd_ingest(cfg)?;
    cmd_subgraph(cfg)?;
    cmd_walk(cfg)?;
    cmd_embed(cfg)?;
    cmd_dataset(cfg)?;
    cmd_train(cfg)?;
    cmd_eval(cfg)
}

/// Validation accuracy helper reused by tests: accuracy of the
/// configured sweep relation's model on the test split.
pub fn sweep_relation_test_accuracy(cfg: &PipelineConfig) -> Result<f64, PipelineError> {
    let test = EdgeDataset::read_csv(&workpath(cfg, TEST_SET))?;
    let forest = Forest::read_file(&workpath(cfg, &model_file_name(&cfg.sweep.relation)))?;
    Ok(accuracy_on(&forest, &test, cfg.report.threshold)?)
}
