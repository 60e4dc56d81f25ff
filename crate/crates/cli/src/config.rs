//! Pipeline configuration: one TOML file drives every stage. The global
//! `seed` deterministically derives each stage's seed, so a single value
//! reproduces the whole run; `workers = 1` is the deterministic
//! reference mode.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use lexlink_core::dataset::SplitConfig;
use lexlink_core::embedding::SgnsConfig;
use lexlink_core::eval::ReportFormat;
use lexlink_core::forest::ForestConfig;
use lexlink_core::graph::{NodeType, RelationType, SubgraphFilter};
use lexlink_core::rng::derive_seed_str;
use lexlink_core::walk::WalkConfig;
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Input nodes TSV (written by `synth`, read by `ingest`).
    pub nodes: PathBuf,
    /// Input edges TSV.
    pub edges: PathBuf,
    /// Directory for all stage artifacts and the manifest.
    pub workdir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            nodes: PathBuf::from("nodes.tsv"),
            edges: PathBuf::from("edges.tsv"),
            workdir: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgraphConfig {
    pub node_types: Vec<NodeType>,
    pub rel_types: Vec<RelationType>,
    pub min_edge_weight: f64,
}

impl Default for SubgraphConfig {
    fn default() -> Self {
        let base = SubgraphFilter::default();
        SubgraphConfig {
            node_types: base.node_types.into_iter().collect(),
            rel_types: base.rel_types.into_iter().collect(),
            min_edge_weight: base.min_edge_weight,
        }
    }
}

impl SubgraphConfig {
    pub fn to_filter(&self) -> SubgraphFilter {
        SubgraphFilter {
            node_types: self.node_types.iter().cloned().collect::<BTreeSet<_>>(),
            rel_types: self.rel_types.iter().cloned().collect::<BTreeSet<_>>(),
            min_edge_weight: self.min_edge_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Labels require edge weight strictly greater than this.
    pub min_label_weight: f64,
    pub test_fraction: f64,
    pub stratify_on: Option<RelationType>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            min_label_weight: 80.0,
            test_fraction: 0.2,
            stratify_on: Some(RelationType::Syn),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub grid: Vec<usize>,
    pub relation: RelationType,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: lexlink_core::forest::default_sweep_grid(),
            relation: RelationType::Syn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub format: ReportFormat,
    pub threshold: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            format: ReportFormat::Json,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Global seed; every stage seed is derived from it.
    pub seed: u64,
    pub workers: usize,
    pub paths: Paths,
    pub subgraph: SubgraphConfig,
    pub walk: WalkConfig,
    pub sgns: SgnsConfig,
    pub dataset: DatasetConfig,
    pub forest: ForestConfig,
    pub sweep: SweepConfig,
    pub report: ReportConfig,
    pub synthetic: SyntheticSpec,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| {
            PipelineError::Config(format!("invalid config {}: {e}", path.display()))
        })?;
        if cfg.workers == 0 {
            cfg.workers = 1;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if let Err(e) = self.walk.validate() {
            return bad(format!("walk: {e}"));
        }
        if let Err(e) = self.sgns.validate() {
            return bad(format!("sgns: {e}"));
        }
        if !(self.dataset.test_fraction > 0.0 && self.dataset.test_fraction < 1.0) {
            return bad("dataset: test_fraction must lie in (0, 1)".into());
        }
        if self.subgraph.min_edge_weight < 0.0 {
            return bad("subgraph: min_edge_weight must be non-negative".into());
        }
        if self.forest.n_estimators == 0 {
            return bad("forest: n_estimators must be at least 1".into());
        }
        if self.sweep.grid.is_empty() {
            return bad("sweep: grid must not be empty".into());
        }
        if self.sweep.relation.label_index().is_none() {
            return bad(format!(
                "sweep: {} is not a predictable relation",
                self.sweep.relation
            ));
        }
        if let Some(rel) = &self.dataset.stratify_on {
            if rel.label_index().is_none() {
                return bad(format!("dataset: cannot stratify on {rel}"));
            }
        }
        self.synthetic.validate().map_err(PipelineError::Config)
    }

    pub fn stage_seed(&self, label: &str) -> u64 {
        derive_seed_str(self.seed, label)
    }

    /// Walk settings with the derived stage seed applied.
    pub fn effective_walk(&self) -> WalkConfig {
        WalkConfig {
            seed: self.stage_seed("walk"),
            ..self.walk.clone()
        }
    }

    pub fn effective_sgns(&self) -> SgnsConfig {
        SgnsConfig {
            seed: self.stage_seed("sgns"),
            ..self.sgns.clone()
        }
    }

    pub fn effective_split(&self) -> SplitConfig {
        SplitConfig {
            test_fraction: self.dataset.test_fraction,
            stratify_on: self.dataset.stratify_on.clone(),
            seed: self.stage_seed("split"),
        }
    }

    pub fn effective_forest(&self, relation: &RelationType) -> ForestConfig {
        ForestConfig {
            seed: self.stage_seed(&format!("train:{relation}")),
            ..self.forest.clone()
        }
    }

    pub fn effective_synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.stage_seed("synthetic"),
            ..self.synthetic.clone()
        }
    }

    /// Hex SHA-256 of the effective configuration, recorded in reports.
    /// Paths are normalized out: the fingerprint captures the run's
    /// parameters, not where its files happen to live.
    pub fn fingerprint(&self) -> String {
        let normalized = PipelineConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&normalized).expect("config serializes");
        crate::manifest::sha256_hex_bytes(&bytes)
    }
}
