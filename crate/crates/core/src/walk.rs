//! Second-order biased random walks with constant-time alias sampling.
//!
//! Walk transition probabilities follow the node2vec rule: from `cur`
//! with predecessor `prev`, a neighbor `x` is weighted `w/p` if `x` is
//! `prev` itself, `w` if `x` is also a neighbor of `prev`, and `w/q`
//! otherwise. Each walk owns an RNG stream derived from
//! `(seed, start node, walk index)`, so corpora are identical for any
//! worker count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, TypedGraph};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("all sampling weights are zero")]
    AllZeroWeights,
    #[error("node {0} has no neighbors to step to")]
    NoNeighbors(NodeId),
    #[error("cannot walk an empty graph")]
    EmptyGraph,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directedness {
    Directed,
    Undirected,
}

/// When to precompute per-edge second-order alias tables. `Auto` falls
/// back to on-the-fly construction once the tables would exceed roughly
/// ten million entries. Both modes sample identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionCache {
    Auto,
    Precompute,
    OnTheFly,
}

const AUTO_CACHE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    /// Maximum walk length in nodes (dead ends truncate earlier).
    pub walk_length: usize,
    pub walks_per_source: usize,
    /// Return parameter p: likelihood of stepping back to the previous node.
    pub return_param: f64,
    /// In-out parameter q: local (BFS-like) vs outward (DFS-like) bias.
    pub inout_param: f64,
    pub directedness: Directedness,
    pub transition_cache: TransitionCache,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 80,
            walks_per_source: 1,
            return_param: 1.0,
            inout_param: 1.0,
            directedness: Directedness::Undirected,
            transition_cache: TransitionCache::Auto,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.walk_length < 2 {
            return Err("walk_length must be at least 2".into());
        }
        if self.walks_per_source < 1 {
            return Err("walks_per_source must be at least 1".into());
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.return_param) || !positive(self.inout_param) {
            return Err("return_param and inout_param must be positive".into());
        }
        Ok(())
    }
}

/// Alias table for O(1) sampling from a fixed discrete distribution
/// (Vose's method). Construction is O(n).
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
    support: Vec<u32>,
}

impl AliasTable {
    /// Builds a table over outcomes `0..weights.len()`.
    pub fn from_weights(weights: &[f64]) -> Result<Self, WalkError> {
        Self::new(weights, (0..weights.len() as u32).collect())
    }

    /// Builds a table whose `sample` returns the outcome ids in
    /// `support`, distributed proportionally to `weights`.
    pub fn new(weights: &[f64], support: Vec<u32>) -> Result<Self, WalkError> {
        assert_eq!(weights.len(), support.len());
        debug_assert!(weights.iter().all(|w| *w >= 0.0 && w.is_finite()));
        let total: f64 = weights.iter().sum();
        if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(WalkError::AllZeroWeights);
        }
        let n = weights.len();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0usize; n];
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut small: Vec<usize> = Vec::with_capacity(n);
        let mut large: Vec<usize> = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &i in small.iter().chain(large.iter()) {
            prob[i] = 1.0;
            alias[i] = i;
        }
        Ok(AliasTable {
            prob,
            alias,
            support,
        })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Draws one outcome id in O(1).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            self.support[i]
        } else {
            self.support[self.alias[i]]
        }
    }

    /// Reconstructs the probability each input slot is sampled with.
    /// Matches the normalized input weights up to float rounding.
    pub fn slot_probabilities(&self) -> Vec<f64> {
        let n = self.prob.len();
        let mut probs = vec![0.0; n];
        for i in 0..n {
            probs[i] += self.prob[i] / n as f64;
            if self.alias[i] != i {
                probs[self.alias[i]] += (1.0 - self.prob[i]) / n as f64;
            }
        }
        probs
    }
}

/// Adjacency view used for walking: parallel relation edges collapsed by
/// summing weights, optionally symmetrized by adding reverse edges.
/// Neighbor lists are sorted by node id.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    neighbors: Vec<Vec<(NodeId, f64)>>,
}

impl WalkGraph {
    pub fn from_graph(g: &TypedGraph, directedness: Directedness) -> Self {
        let n = g.node_count();
        let mut acc: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for e in g.edges() {
            push_weight(&mut acc[e.src as usize], e.dst, e.weight);
            if directedness == Directedness::Undirected {
                push_weight(&mut acc[e.dst as usize], e.src, e.weight);
            }
        }
        for list in &mut acc {
            list.sort_by_key(|(id, _)| *id);
        }
        WalkGraph { neighbors: acc }
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.neighbors[id as usize]
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.neighbors[src as usize]
            .binary_search_by_key(&dst, |(id, _)| *id)
            .is_ok()
    }

    /// Unnormalized node2vec transition weights out of `cur`, given the
    /// walk arrived from `prev` (`None` for the first step).
    pub fn second_order_weights(
        &self,
        prev: Option<NodeId>,
        cur: NodeId,
        cfg: &WalkConfig,
    ) -> Result<Vec<(NodeId, f64)>, WalkError> {
        let neighbors = self.neighbors(cur);
        if neighbors.is_empty() {
            return Err(WalkError::NoNeighbors(cur));
        }
        let weights = match prev {
            None => neighbors.to_vec(),
            Some(prev) => neighbors
                .iter()
                .map(|&(x, w)| {
                    let biased = if x == prev {
                        w / cfg.return_param
                    } else if self.has_edge(prev, x) {
                        w
                    } else {
                        w / cfg.inout_param
                    };
                    (x, biased)
                })
                .collect(),
        };
        Ok(weights)
    }

    fn transition_table(
        &self,
        prev: Option<NodeId>,
        cur: NodeId,
        cfg: &WalkConfig,
    ) -> Result<AliasTable, WalkError> {
        let weights = self.second_order_weights(prev, cur, cfg)?;
        let (support, w): (Vec<u32>, Vec<f64>) = weights.into_iter().unzip();
        AliasTable::new(&w, support)
    }
}

fn push_weight(list: &mut Vec<(NodeId, f64)>, id: NodeId, weight: f64) {
    match list.iter_mut().find(|(x, _)| *x == id) {
        Some((_, w)) => *w += weight,
        None => list.push((id, weight)),
    }
}

/// A collection of walks plus the configuration and graph fingerprint
/// they were generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<NodeId>>,
    pub config: WalkConfig,
    pub graph_fingerprint: u64,
}

impl WalkCorpus {
    /// Resolves node ids to names, the external corpus representation.
    pub fn named_walks(&self, g: &TypedGraph) -> Vec<Vec<String>> {
        self.walks
            .iter()
            .map(|walk| walk.iter().map(|&id| g.name(id).to_string()).collect())
            .collect()
    }

    /// Writes one walk per line, space-separated node names.
    pub fn write_file(&self, g: &TypedGraph, path: &Path) -> Result<(), WalkError> {
        let wrap = |source| WalkError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
        for walk in &self.walks {
            let names: Vec<&str> = walk.iter().map(|&id| g.name(id)).collect();
            writeln!(w, "{}", names.join(" ")).map_err(wrap)?;
        }
        w.flush().map_err(wrap)
    }
}

/// Reads a walk corpus file back as token sequences.
pub fn read_walk_file(path: &Path) -> Result<Vec<Vec<String>>, WalkError> {
    let wrap = |source| WalkError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(wrap)?;
    let mut walks = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(wrap)?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            walks.push(tokens);
        }
    }
    Ok(walks)
}

/// Generates `walks_per_source` walks from every node that has at least
/// one outgoing neighbor in the walk view. Dead ends truncate the walk;
/// nodes without a first step get no walk at all. Deterministic given
/// `(graph, cfg.seed)` for any worker count.
pub fn generate_walks(
    g: &TypedGraph,
    cfg: &WalkConfig,
    workers: usize,
) -> Result<WalkCorpus, WalkError> {
    if g.is_empty() {
        return Err(WalkError::EmptyGraph);
    }
    let view = WalkGraph::from_graph(g, cfg.directedness);
    let starts: Vec<NodeId> = (0..g.node_count() as NodeId)
        .filter(|&id| !view.neighbors(id).is_empty())
        .collect();

    let cache = build_cache(&view, cfg, &starts)?;
    let jobs: Vec<(usize, NodeId)> = (0..cfg.walks_per_source)
        .flat_map(|round| starts.iter().map(move |&s| (round, s)))
        .collect();

    let run = |&(round, start): &(usize, NodeId)| -> Result<Vec<NodeId>, WalkError> {
        walk_from(&view, cfg, cache.as_ref(), start, round)
    };

    let walks: Result<Vec<Vec<NodeId>>, WalkError> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        use rayon::prelude::*;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };

    Ok(WalkCorpus {
        walks: walks?,
        config: cfg.clone(),
        graph_fingerprint: g.fingerprint(),
    })
}

/// Precomputed alias tables: one first-step table per start node and,
/// when affordable, one second-order table per directed edge.
struct Cache {
    first: Vec<Option<AliasTable>>,
    /// Indexed by `prev`, then by the slot of `cur` in `prev`'s neighbor
    /// list. Empty tables mark dead-end successors.
    second: Option<Vec<Vec<AliasTable>>>,
}

fn build_cache(
    view: &WalkGraph,
    cfg: &WalkConfig,
    starts: &[NodeId],
) -> Result<Option<Cache>, WalkError> {
    let n = view.node_count();
    let mut first: Vec<Option<AliasTable>> = vec![None; n];
    for &s in starts {
        first[s as usize] = Some(view.transition_table(None, s, cfg)?);
    }

    let second_entries: usize = (0..n as NodeId)
        .map(|u| {
            view.neighbors(u)
                .iter()
                .map(|&(v, _)| view.neighbors(v).len())
                .sum::<usize>()
        })
        .sum();
    let precompute = match cfg.transition_cache {
        TransitionCache::Precompute => true,
        TransitionCache::OnTheFly => false,
        TransitionCache::Auto => second_entries <= AUTO_CACHE_LIMIT,
    };
    let second = if precompute {
        let mut tables: Vec<Vec<AliasTable>> = Vec::with_capacity(n);
        for u in 0..n as NodeId {
            let mut per_edge = Vec::with_capacity(view.neighbors(u).len());
            for &(v, _) in view.neighbors(u) {
                if view.neighbors(v).is_empty() {
                    per_edge.push(AliasTable {
                        prob: Vec::new(),
                        alias: Vec::new(),
                        support: Vec::new(),
                    });
                } else {
                    per_edge.push(view.transition_table(Some(u), v, cfg)?);
                }
            }
            tables.push(per_edge);
        }
        Some(tables)
    } else {
        None
    };

    Ok(Some(Cache { first, second }))
}

fn walk_from(
    view: &WalkGraph,
    cfg: &WalkConfig,
    cache: Option<&Cache>,
    start: NodeId,
    round: usize,
) -> Result<Vec<NodeId>, WalkError> {
    let stream = derive_seed(cfg.seed, &[u64::from(start), round as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);

    let first = cache.and_then(|c| c.first[start as usize].as_ref());
    let next = match first {
        Some(table) => table.sample(&mut rng),
        None => view.transition_table(None, start, cfg)?.sample(&mut rng),
    };
    walk.push(next);

    while walk.len() < cfg.walk_length {
        let prev = walk[walk.len() - 2];
        let cur = walk[walk.len() - 1];
        if view.neighbors(cur).is_empty() {
            break;
        }
        let cached = cache.and_then(|c| c.second.as_ref()).map(|tables| {
            let slot = view
                .neighbors(prev)
                .binary_search_by_key(&cur, |(id, _)| *id)
                .expect("walk step must follow an edge");
            &tables[prev as usize][slot]
        });
        let next = match cached {
            Some(table) if !table.is_empty() => table.sample(&mut rng),
            _ => view
                .transition_table(Some(prev), cur, cfg)?
                .sample(&mut rng),
        };
        walk.push(next);
    }
    Ok(walk)
}
