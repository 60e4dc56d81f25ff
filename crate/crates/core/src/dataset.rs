//! Supervised edge dataset: one row per ordered node pair connected by
//! at least one predictable relation, with concatenated endpoint
//! embeddings as features and six binary relation labels.
//!
//! Negatives come for free: a pair related by some relation but not `r`
//! is a negative example for `r`. Pairs are directed; `(u, v)` and
//! `(v, u)` are independent rows.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::graph::{NodeId, RelationType, TypedGraph};

/// Number of label columns; fixed by `RelationType::LABELS`.
pub const LABEL_COUNT: usize = 6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("node {0:?} has no embedding")]
    MissingEmbedding(String),
    #[error("need at least 2 rows to split, have {0}")]
    TooFewRows(usize),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub source_name: String,
    pub target_name: String,
    pub source_id: NodeId,
    pub target_id: NodeId,
    /// Source embedding followed by target embedding, verbatim.
    pub features: Vec<f64>,
    /// One flag per `RelationType::LABELS` entry, in order.
    pub labels: [bool; LABEL_COUNT],
}

/// Rows sorted by `(source_id, target_id)`; every `(source, target)`
/// pair appears at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDataset {
    pub rows: Vec<DatasetRow>,
    pub feature_dim: usize,
}

impl EdgeDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(positives, negatives)` per predictable relation.
    pub fn per_label_counts(&self) -> BTreeMap<RelationType, (usize, usize)> {
        RelationType::LABELS
            .iter()
            .enumerate()
            .map(|(slot, rel)| {
                let pos = self.rows.iter().filter(|r| r.labels[slot]).count();
                (rel.clone(), (pos, self.rows.len() - pos))
            })
            .collect()
    }

    /// Writes the CSV interface: names, ids, `x0..x{2d-1}` features,
    /// then one 0/1 column per relation.
    pub fn write_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let wrap_io = |source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| wrap_csv(path, e))?;
        let mut header = vec![
            "source".to_string(),
            "target".to_string(),
            "source_id".to_string(),
            "target_id".to_string(),
        ];
        header.extend((0..self.feature_dim).map(|i| format!("x{i}")));
        header.extend(RelationType::LABELS.iter().map(|r| r.to_string()));
        w.write_record(&header).map_err(|e| wrap_csv(path, e))?;
        for row in &self.rows {
            let mut record = vec![
                row.source_name.clone(),
                row.target_name.clone(),
                row.source_id.to_string(),
                row.target_id.to_string(),
            ];
            record.extend(row.features.iter().map(|x| x.to_string()));
            record.extend(row.labels.iter().map(|&l| if l { "1" } else { "0" }.to_string()));
            w.write_record(&record).map_err(|e| wrap_csv(path, e))?;
        }
        w.flush().map_err(wrap_io)
    }

    /// Reads the CSV interface back.
    pub fn read_csv(path: &Path) -> Result<Self, DatasetError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| wrap_csv(path, e))?;
        let header_len = reader.headers().map_err(|e| wrap_csv(path, e))?.len();
        if header_len < 4 + LABEL_COUNT {
            return Err(DatasetError::Parse {
                path: path.display().to_string(),
                reason: format!("too few columns: {header_len}"),
            });
        }
        let feature_dim = header_len - 4 - LABEL_COUNT;
        let parse_err = |reason: String| DatasetError::Parse {
            path: path.display().to_string(),
            reason,
        };

        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| wrap_csv(path, e))?;
            let field = |i: usize| record.get(i).unwrap_or("");
            let mut features = Vec::with_capacity(feature_dim);
            for i in 0..feature_dim {
                features.push(
                    field(4 + i)
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("bad feature: {e}")))?,
                );
            }
            let mut labels = [false; LABEL_COUNT];
            for (slot, l) in labels.iter_mut().enumerate() {
                *l = match field(4 + feature_dim + slot) {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(format!("bad label {other:?}"))),
                };
            }
            rows.push(DatasetRow {
                source_name: field(0).to_string(),
                target_name: field(1).to_string(),
                source_id: field(2)
                    .parse()
                    .map_err(|e| parse_err(format!("bad source_id: {e}")))?,
                target_id: field(3)
                    .parse()
                    .map_err(|e| parse_err(format!("bad target_id: {e}")))?,
                features,
                labels,
            });
        }
        Ok(EdgeDataset { rows, feature_dim })
    }
}

fn wrap_csv(path: &Path, e: csv::Error) -> DatasetError {
    DatasetError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Builds the dataset from a graph and trained embeddings.
///
/// A pair `(u, v)` becomes a row when at least one of the six
/// predictable relations links `u` to `v` with weight strictly greater
/// than `min_label_weight`; each label column then marks whether that
/// relation clears the same threshold. Features are the source then
/// target embeddings.
pub fn build_dataset(
    g: &TypedGraph,
    embeddings: &EmbeddingMatrix,
    min_label_weight: f64,
) -> Result<EdgeDataset, DatasetError> {
    let mut pairs: BTreeMap<(NodeId, NodeId), [bool; LABEL_COUNT]> = BTreeMap::new();
    for edge in g.edges() {
        if let Some(slot) = edge.rel.label_index() {
            if edge.weight > min_label_weight {
                pairs.entry((edge.src, edge.dst)).or_default()[slot] = true;
            }
        }
    }

    let feature_dim = 2 * embeddings.dim();
    let mut rows = Vec::with_capacity(pairs.len());
    for ((src, dst), labels) in pairs {
        let src_name = g.name(src);
        let dst_name = g.name(dst);
        let src_vec = embeddings
            .vector(src_name)
            .ok_or_else(|| DatasetError::MissingEmbedding(src_name.to_string()))?;
        let dst_vec = embeddings
            .vector(dst_name)
            .ok_or_else(|| DatasetError::MissingEmbedding(dst_name.to_string()))?;
        let mut features = Vec::with_capacity(feature_dim);
        features.extend_from_slice(src_vec);
        features.extend_from_slice(dst_vec);
        rows.push(DatasetRow {
            source_name: src_name.to_string(),
            target_name: dst_name.to_string(),
            source_id: src,
            target_id: dst,
            features,
            labels,
        });
    }
    Ok(EdgeDataset { rows, feature_dim })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Fraction of rows assigned to the test part, in (0, 1).
    pub test_fraction: f64,
    /// Keep this label's positive rate balanced across the two parts.
    pub stratify_on: Option<RelationType>,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            stratify_on: None,
            seed: 0,
        }
    }
}

/// Result of `split`. `stratified` records whether the requested
/// stratification was achievable; on fallback the split is plain random.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: EdgeDataset,
    pub test: EdgeDataset,
    pub stratified: bool,
}

/// Deterministic, disjoint, exhaustive train/test split with
/// `round(test_fraction * n)` test rows.
pub fn split(ds: &EdgeDataset, cfg: &SplitConfig) -> Result<SplitOutcome, DatasetError> {
    let n = ds.rows.len();
    if n < 2 {
        return Err(DatasetError::TooFewRows(n));
    }
    assert!(
        cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0,
        "test_fraction must lie in (0, 1)"
    );
    let test_target = ((cfg.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut test_idx: Vec<usize> = match cfg.stratify_on {
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            shuffle(&mut order, &mut rng);
            order[..test_target].to_vec()
        }
        Some(ref rel) => {
            let slot = rel.label_index().expect("stratify_on must be a label");
            let mut pos: Vec<usize> = (0..n).filter(|&i| ds.rows[i].labels[slot]).collect();
            let mut neg: Vec<usize> = (0..n).filter(|&i| !ds.rows[i].labels[slot]).collect();
            shuffle(&mut pos, &mut rng);
            shuffle(&mut neg, &mut rng);
            let test_pos = ((cfg.test_fraction * pos.len() as f64).round() as usize)
                .min(pos.len())
                .min(test_target);
            let test_neg = (test_target - test_pos).min(neg.len());
            // Rounding may leave a shortfall when one class runs dry.
            let shortfall = test_target - test_pos - test_neg;
            let test_pos = (test_pos + shortfall).min(pos.len());
            let mut idx = pos[..test_pos].to_vec();
            idx.extend_from_slice(&neg[..test_neg]);
            idx
        }
    };
    test_idx.sort_unstable();

    let take = |indices: &[usize]| -> EdgeDataset {
        EdgeDataset {
            rows: indices.iter().map(|&i| ds.rows[i].clone()).collect(),
            feature_dim: ds.feature_dim,
        }
    };
    let in_test: Vec<bool> = {
        let mut flags = vec![false; n];
        for &i in &test_idx {
            flags[i] = true;
        }
        flags
    };
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    let train = take(&train_idx);
    let test = take(&test_idx);

    let stratified = match cfg.stratify_on {
        None => false,
        Some(ref rel) => {
            let slot = rel.label_index().expect("stratify_on must be a label");
            let rate = |part: &EdgeDataset| {
                part.rows.iter().filter(|r| r.labels[slot]).count() as f64
                    / part.rows.len().max(1) as f64
            };
            let whole = ds.rows.iter().filter(|r| r.labels[slot]).count() as f64 / n as f64;
            (rate(&train) - whole).abs() <= 0.02 && (rate(&test) - whole).abs() <= 0.02
        }
    };

    Ok(SplitOutcome {
        train,
        test,
        stratified,
    })
}

/// Fisher-Yates with our seeded RNG.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}
