//! Skip-gram with negative sampling over walk corpora, plus similarity
//! and analogy queries on the trained vectors.
//!
//! The objective for a (center, context) pair with k noise tokens is
//! `-log sigmoid(u.v) - sum_j log sigmoid(-u.n_j)`, with u the center's
//! input vector and v / n_j output vectors. Training is plain SGD with a
//! linearly decaying learning rate. Single-worker mode is bit-for-bit
//! deterministic; multi-worker mode updates the shared matrix without
//! locks (lost updates allowed, torn scalar reads impossible).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::derive_seed;
use crate::walk::AliasTable;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown name {0:?}")]
    UnknownName(String),
    #[error("zero vector for {0:?}")]
    ZeroVector(String),
    #[error("analogy query has no terms")]
    EmptyQuery,
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    /// Embedding dimension d; edge feature vectors are 2d wide.
    pub dim: usize,
    /// Symmetric context window radius.
    pub window: usize,
    /// Noise samples per (center, context) pair.
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    /// Exponent applied to unigram counts for the noise distribution.
    pub noise_exponent: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 20,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            noise_exponent: 0.75,
            seed: 0,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim < 1 {
            return Err("dim must be at least 1".into());
        }
        if self.window < 1 {
            return Err("window must be at least 1".into());
        }
        if self.min_lr > self.initial_lr {
            return Err("min_lr must not exceed initial_lr".into());
        }
        Ok(())
    }
}

/// Trained node vectors. `input` rows are the published embeddings;
/// `output` rows are the context vectors kept from training (absent on
/// matrices loaded from disk).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    names: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    input: Vec<f64>,
    output: Option<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn vocab_len(&self) -> usize {
        self.names.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn input_row(&self, idx: usize) -> &[f64] {
        &self.input[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn output_row(&self, idx: usize) -> Option<&[f64]> {
        self.output
            .as_ref()
            .map(|out| &out[idx * self.dim..(idx + 1) * self.dim])
    }

    /// Published embedding for a node name.
    pub fn vector(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.input_row(i))
    }

    /// Cosine similarity between two named nodes' input vectors.
    pub fn cosine_similarity(&self, a: &str, b: &str) -> Result<f64, EmbedError> {
        let va = self
            .vector(a)
            .ok_or_else(|| EmbedError::UnknownName(a.to_string()))?;
        let vb = self
            .vector(b)
            .ok_or_else(|| EmbedError::UnknownName(b.to_string()))?;
        let na = norm(va);
        let nb = norm(vb);
        if na == 0.0 {
            return Err(EmbedError::ZeroVector(a.to_string()));
        }
        if nb == 0.0 {
            return Err(EmbedError::ZeroVector(b.to_string()));
        }
        Ok(dot(va, vb) / (na * nb))
    }

    /// Ranks all vocabulary items (excluding the query terms) by cosine
    /// to the normalized sum of positive minus negative unit vectors.
    pub fn analogy_query(
        &self,
        positive: &[&str],
        negative: &[&str],
        top_n: usize,
    ) -> Result<Vec<(String, f64)>, EmbedError> {
        if positive.is_empty() && negative.is_empty() {
            return Err(EmbedError::EmptyQuery);
        }
        let mut target = vec![0.0; self.dim];
        let mut excluded = Vec::new();
        for (names, sign) in [(positive, 1.0), (negative, -1.0)] {
            for &name in names {
                let v = self
                    .vector(name)
                    .ok_or_else(|| EmbedError::UnknownName(name.to_string()))?;
                let n = norm(v);
                if n == 0.0 {
                    return Err(EmbedError::ZeroVector(name.to_string()));
                }
                for (t, x) in target.iter_mut().zip(v) {
                    *t += sign * x / n;
                }
                excluded.push(name);
            }
        }
        let tn = norm(&target);
        if tn == 0.0 {
            return Err(EmbedError::ZeroVector("analogy target".to_string()));
        }

        let mut scored: Vec<(usize, f64)> = (0..self.names.len())
            .filter(|&i| !excluded.contains(&self.names[i].as_str()))
            .filter_map(|i| {
                let v = self.input_row(i);
                let n = norm(v);
                (n > 0.0).then(|| (i, dot(v, &target) / (n * tn)))
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(top_n);
        Ok(scored
            .into_iter()
            .map(|(i, s)| (self.names[i].clone(), s))
            .collect())
    }

    /// Writes the text format: first line `|V| d`, then one line per
    /// node, `name v1 .. vd`, floats at full round-trip precision.
    pub fn write_file(&self, path: &Path) -> Result<(), EmbedError> {
        let wrap = |source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
        writeln!(w, "{} {}", self.vocab_len(), self.dim).map_err(wrap)?;
        for (i, name) in self.names.iter().enumerate() {
            write!(w, "{name}").map_err(wrap)?;
            for x in self.input_row(i) {
                write!(w, " {x}").map_err(wrap)?;
            }
            writeln!(w).map_err(wrap)?;
        }
        w.flush().map_err(wrap)
    }

    /// Loads the text format. Names are read as everything left of the
    /// final `d` float tokens, so single spaces inside names survive.
    pub fn read_file(path: &Path) -> Result<Self, EmbedError> {
        let wrap = |source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        };
        let err = |line: usize, reason: String| EmbedError::Parse {
            path: path.display().to_string(),
            line,
            reason,
        };
        let file = File::open(path).map_err(wrap)?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let header = header.map_err(wrap)?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(1, format!("bad header: {e}")))?;
        if dims.len() != 2 {
            return Err(err(1, "header must be `count dim`".into()));
        }
        let (count, dim) = (dims[0], dims[1]);

        let mut names = Vec::with_capacity(count);
        let mut index = HashMap::with_capacity(count);
        let mut input = Vec::with_capacity(count * dim);
        for (line_idx, line) in lines {
            let line = line.map_err(wrap)?;
            if line.trim().is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() < dim + 1 {
                return Err(err(line_idx + 1, format!("expected name + {dim} floats")));
            }
            let name_tokens = &tokens[..tokens.len() - dim];
            let name = name_tokens.join(" ");
            for t in &tokens[tokens.len() - dim..] {
                let x: f64 = t
                    .parse()
                    .map_err(|e| err(line_idx + 1, format!("bad float {t:?}: {e}")))?;
                input.push(x);
            }
            index.insert(name.clone(), names.len());
            names.push(name);
        }
        if names.len() != count {
            return Err(err(
                0,
                format!("header said {count} rows, found {}", names.len()),
            ));
        }
        Ok(EmbeddingMatrix {
            names,
            index,
            dim,
            input,
            output: None,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Overflow-safe logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Overflow-safe `ln(sigmoid(x))`.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Gradients of the SGNS pair loss with respect to every input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrads {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub noise: Vec<Vec<f64>>,
}

/// Loss and exact gradients for one (center, context, noise) triple:
/// `loss = -log sigmoid(u.v) - sum_j log sigmoid(-u.n_j)`.
pub fn sgns_loss_and_grads(
    center: &[f64],
    context: &[f64],
    noise: &[&[f64]],
) -> (f64, SgnsGrads) {
    let mut grads = SgnsGrads {
        center: vec![0.0; center.len()],
        context: vec![0.0; center.len()],
        noise: vec![vec![0.0; center.len()]; noise.len()],
    };
    let loss = loss_and_grads_into(
        center,
        context,
        noise,
        &mut grads.center,
        &mut grads.context,
        &mut grads.noise,
    );
    (loss, grads)
}

/// Shared gradient core used by both the public API and the training
/// loop. Output buffers are overwritten, not accumulated into.
fn loss_and_grads_into(
    center: &[f64],
    context: &[f64],
    noise: &[&[f64]],
    g_center: &mut [f64],
    g_context: &mut [f64],
    g_noise: &mut [Vec<f64>],
) -> f64 {
    let pos_dot = dot(center, context);
    let pos_sig = sigmoid(pos_dot);
    let mut loss = -log_sigmoid(pos_dot);

    // d/du -log s(u.v) = (s(u.v) - 1) v ; d/dv = (s(u.v) - 1) u
    let pos_coeff = pos_sig - 1.0;
    for i in 0..center.len() {
        g_center[i] = pos_coeff * context[i];
        g_context[i] = pos_coeff * center[i];
    }
    for (j, n) in noise.iter().enumerate() {
        let neg_dot = dot(center, n);
        let neg_sig = sigmoid(neg_dot);
        loss -= log_sigmoid(-neg_dot);
        // d/du -log s(-u.n) = s(u.n) n ; d/dn = s(u.n) u
        for i in 0..center.len() {
            g_center[i] += neg_sig * n[i];
            g_noise[j][i] = neg_sig * center[i];
        }
    }
    loss
}

/// Per-epoch mean pair loss, for convergence checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub epoch_mean_loss: Vec<f64>,
    pub total_pairs: usize,
}

/// f64 cell with atomic (hence never torn) loads and stores. Relaxed
/// ordering is enough: hogwild updates tolerate lost writes.
struct AtomicF64(AtomicU64);

impl AtomicF64 {
    fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn store(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }
}

struct SharedMatrix {
    cells: Vec<AtomicF64>,
    dim: usize,
}

impl SharedMatrix {
    fn load_row(&self, idx: usize, buf: &mut [f64]) {
        let base = idx * self.dim;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = self.cells[base + i].load();
        }
    }

    fn apply_grad(&self, idx: usize, grad: &[f64], lr: f64) {
        let base = idx * self.dim;
        for (i, g) in grad.iter().enumerate() {
            let cell = &self.cells[base + i];
            cell.store(cell.load() - lr * g);
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.cells.into_iter().map(|c| c.load()).collect()
    }
}

/// Trains embeddings on token walks. See `train_embeddings_with_stats`.
pub fn train_embeddings(
    walks: &[Vec<String>],
    cfg: &SgnsConfig,
    workers: usize,
) -> Result<EmbeddingMatrix, EmbedError> {
    train_embeddings_with_stats(walks, cfg, workers).map(|(m, _)| m)
}

/// Trains embeddings and returns per-epoch loss statistics.
///
/// The vocabulary is the set of tokens appearing in the corpus, in first
/// appearance order. Negative samples are drawn from the unigram
/// distribution raised to `noise_exponent`. The learning rate decays
/// linearly from `initial_lr` to `min_lr` over all (center, context)
/// pairs across all epochs.
pub fn train_embeddings_with_stats(
    walks: &[Vec<String>],
    cfg: &SgnsConfig,
    workers: usize,
) -> Result<(EmbeddingMatrix, TrainStats), EmbedError> {
    if walks.iter().all(|w| w.is_empty()) {
        return Err(EmbedError::EmptyCorpus);
    }

    // Vocabulary in first-appearance order, with token counts.
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut counts: Vec<f64> = Vec::new();
    let encoded: Vec<Vec<u32>> = walks
        .iter()
        .map(|walk| {
            walk.iter()
                .map(|token| {
                    let id = *index.entry(token.clone()).or_insert_with(|| {
                        names.push(token.clone());
                        counts.push(0.0);
                        names.len() - 1
                    });
                    counts[id] += 1.0;
                    id as u32
                })
                .collect()
        })
        .collect();
    let vocab = names.len();
    let dim = cfg.dim;

    // Canonical SGNS init: input uniform in [-0.5/d, 0.5/d], output zero.
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0]));
    let half = 0.5 / dim as f64;
    let input = SharedMatrix {
        cells: (0..vocab * dim)
            .map(|_| AtomicF64::new(init_rng.gen_range(-half..half)))
            .collect(),
        dim,
    };
    let output = SharedMatrix {
        cells: (0..vocab * dim).map(|_| AtomicF64::new(0.0)).collect(),
        dim,
    };

    let pairs_per_walk: Vec<usize> = encoded.iter().map(|w| count_pairs(w, cfg.window)).collect();
    let pairs_per_epoch: usize = pairs_per_walk.iter().sum();
    let total_pairs = pairs_per_epoch * cfg.epochs;

    let noise_weights: Vec<f64> = counts.iter().map(|c| c.powf(cfg.noise_exponent)).collect();
    let noise_table =
        AliasTable::from_weights(&noise_weights).expect("corpus has at least one token");

    let pair_counter = AtomicUsize::new(0);
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let chunk_size = encoded.len().div_ceil(workers.max(1));
        let chunks: Vec<(usize, &[Vec<u32>])> = encoded
            .chunks(chunk_size)
            .enumerate()
            .map(|(i, c)| (i * chunk_size, c))
            .collect();

        let run_chunk = |(first_walk, chunk): (usize, &[Vec<u32>])| -> (f64, usize) {
            let mut worker = Worker::new(dim, cfg.negatives);
            let mut loss_sum = 0.0;
            let mut loss_count = 0usize;
            for (offset, walk) in chunk.iter().enumerate() {
                let walk_idx = first_walk + offset;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.seed,
                    &[1, epoch as u64, walk_idx as u64],
                ));
                for center_pos in 0..walk.len() {
                    let lo = center_pos.saturating_sub(cfg.window);
                    let hi = (center_pos + cfg.window).min(walk.len() - 1);
                    for context_pos in lo..=hi {
                        if context_pos == center_pos {
                            continue;
                        }
                        let t = pair_counter.fetch_add(1, Ordering::Relaxed);
                        let lr = schedule_lr(cfg, t, total_pairs);
                        loss_sum += worker.train_pair(
                            &input,
                            &output,
                            walk[center_pos] as usize,
                            walk[context_pos] as usize,
                            &noise_table,
                            vocab,
                            lr,
                            &mut rng,
                        );
                        loss_count += 1;
                    }
                }
            }
            (loss_sum, loss_count)
        };

        let results: Vec<(f64, usize)> = if workers > 1 {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .into_iter()
                    .map(|chunk| scope.spawn(move || run_chunk(chunk)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            })
        } else {
            chunks.into_iter().map(run_chunk).collect()
        };

        let (loss_sum, loss_count) = results
            .into_iter()
            .fold((0.0, 0), |(s, c), (ls, lc)| (s + ls, c + lc));
        epoch_mean_loss.push(if loss_count > 0 {
            loss_sum / loss_count as f64
        } else {
            0.0
        });
    }

    let matrix = EmbeddingMatrix {
        names,
        index,
        dim,
        input: input.into_vec(),
        output: Some(output.into_vec()),
    };
    debug_assert!(matrix.input.iter().all(|x| x.is_finite()));
    Ok((
        matrix,
        TrainStats {
            epoch_mean_loss,
            total_pairs,
        },
    ))
}

fn count_pairs(walk: &[u32], window: usize) -> usize {
    (0..walk.len())
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len().saturating_sub(1));
            hi - lo
        })
        .sum()
}

fn schedule_lr(cfg: &SgnsConfig, t: usize, total: usize) -> f64 {
    if total == 0 {
        return cfg.initial_lr;
    }
    let progress = t as f64 / total as f64;
    (cfg.initial_lr + (cfg.min_lr - cfg.initial_lr) * progress).max(cfg.min_lr)
}

/// Per-worker scratch buffers, so the hot loop never allocates.
struct Worker {
    center: Vec<f64>,
    context: Vec<f64>,
    noise: Vec<Vec<f64>>,
    g_center: Vec<f64>,
    g_context: Vec<f64>,
    g_noise: Vec<Vec<f64>>,
    noise_ids: Vec<usize>,
}

impl Worker {
    fn new(dim: usize, negatives: usize) -> Self {
        Worker {
            center: vec![0.0; dim],
            context: vec![0.0; dim],
            noise: vec![vec![0.0; dim]; negatives],
            g_center: vec![0.0; dim],
            g_context: vec![0.0; dim],
            g_noise: vec![vec![0.0; dim]; negatives],
            noise_ids: Vec::with_capacity(negatives),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn train_pair<R: Rng>(
        &mut self,
        input: &SharedMatrix,
        output: &SharedMatrix,
        center_id: usize,
        context_id: usize,
        noise_table: &AliasTable,
        vocab: usize,
        lr: f64,
        rng: &mut R,
    ) -> f64 {
        self.noise_ids.clear();
        // Redraw noise tokens that collide with the positive context;
        // impossible to avoid when the vocabulary is a single token.
        if vocab > 1 {
            while self.noise_ids.len() < self.noise.len() {
                let cand = noise_table.sample(rng) as usize;
                if cand != context_id {
                    self.noise_ids.push(cand);
                }
            }
        }

        input.load_row(center_id, &mut self.center);
        output.load_row(context_id, &mut self.context);
        for (buf, &id) in self.noise.iter_mut().zip(&self.noise_ids) {
            output.load_row(id, buf);
        }

        let noise_refs: Vec<&[f64]> = self.noise[..self.noise_ids.len()]
            .iter()
            .map(|v| v.as_slice())
            .collect();
        let loss = loss_and_grads_into(
            &self.center,
            &self.context,
            &noise_refs,
            &mut self.g_center,
            &mut self.g_context,
            &mut self.g_noise,
        );

        input.apply_grad(center_id, &self.g_center, lr);
        output.apply_grad(context_id, &self.g_context, lr);
        for (g, &id) in self.g_noise.iter().zip(&self.noise_ids) {
            output.apply_grad(id, g, lr);
        }
        loss
    }
}
