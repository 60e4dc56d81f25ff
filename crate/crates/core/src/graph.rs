//! Typed, weighted, multi-relational graph: data model, TSV ingestion,
//! subgraph selection, and serialization.
//!
//! Nodes are `(name, type, weight)` records, edges are
//! `(src, relation, dst, weight)` records. The graph is immutable after
//! construction and safe to share across threads.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::fnv1a64;

/// Dense node index, assigned in ingest order. Names are the stable
/// external identity; ids are valid only within one graph instance.
pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}: {failed} of {total} records malformed (over 10% tolerance)")]
    Format {
        file: String,
        failed: usize,
        total: usize,
    },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// Node category. `n_term` and `n_form` are the two types the pipeline
/// keeps by default; anything else is preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    Term,
    Form,
    Other(String),
}

impl FromStr for NodeType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "n_term" => NodeType::Term,
            "n_form" => NodeType::Form,
            other => NodeType::Other(other.to_string()),
        })
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeType::Term => f.write_str("n_term"),
            NodeType::Form => f.write_str("n_form"),
            NodeType::Other(s) => f.write_str(s),
        }
    }
}

/// Relation category. Six of these are the predictable labels the
/// classifiers target; `RaffSem` (sense refinement) participates in the
/// graph structure but is never a label. Unknown relation strings are
/// kept as `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationType {
    RaffSem,
    Syn,
    Isa,
    Hypo,
    Lieu,
    Agent,
    AgentInv,
    Other(String),
}

impl RelationType {
    /// The six predictable relations, in canonical label/report order.
    pub const LABELS: [RelationType; 6] = [
        RelationType::Syn,
        RelationType::Isa,
        RelationType::Hypo,
        RelationType::Lieu,
        RelationType::AgentInv,
        RelationType::Agent,
    ];

    /// The seven relation types kept by the default subgraph selection.
    pub const SUBGRAPH_DEFAULT: [RelationType; 7] = [
        RelationType::RaffSem,
        RelationType::Syn,
        RelationType::Isa,
        RelationType::Hypo,
        RelationType::Lieu,
        RelationType::Agent,
        RelationType::AgentInv,
    ];

    /// Column position of this relation among the predictable labels,
    /// or `None` for non-label relations.
    pub fn label_index(&self) -> Option<usize> {
        Self::LABELS.iter().position(|r| r == self)
    }
}

impl FromStr for RelationType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "r_raff_sem" => RelationType::RaffSem,
            "r_syn" => RelationType::Syn,
            "r_isa" => RelationType::Isa,
            "r_hypo" => RelationType::Hypo,
            "r_lieu" => RelationType::Lieu,
            "r_agent" => RelationType::Agent,
            "r_agent-1" => RelationType::AgentInv,
            other => RelationType::Other(other.to_string()),
        })
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationType::RaffSem => f.write_str("r_raff_sem"),
            RelationType::Syn => f.write_str("r_syn"),
            RelationType::Isa => f.write_str("r_isa"),
            RelationType::Hypo => f.write_str("r_hypo"),
            RelationType::Lieu => f.write_str("r_lieu"),
            RelationType::Agent => f.write_str("r_agent"),
            RelationType::AgentInv => f.write_str("r_agent-1"),
            RelationType::Other(s) => f.write_str(s),
        }
    }
}

impl Serialize for RelationType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap())
    }
}

impl Serialize for NodeType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodeType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub node_type: NodeType,
    /// Usage-frequency proxy; non-negative.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub rel: RelationType,
    pub dst: NodeId,
    /// Relation strength; non-negative.
    pub weight: f64,
}

/// Outgoing half-edge stored in adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct OutEdge {
    pub dst: NodeId,
    pub rel: RelationType,
    pub weight: f64,
}

/// Incoming half-edge stored in reverse adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct InEdge {
    pub src: NodeId,
    pub rel: RelationType,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

/// Immutable multi-relational weighted graph.
///
/// Adjacency lists are sorted by `(neighbor id, relation)` so iteration
/// order is deterministic. Each `(src, rel, dst)` triple appears at most
/// once; duplicate ingested triples keep the maximum weight.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedGraph {
    nodes: Vec<Node>,
    out: Vec<Vec<OutEdge>>,
    inc: Vec<Vec<InEdge>>,
    name_index: HashMap<String, NodeId>,
    edge_count: usize,
}

impl TypedGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id as usize)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    /// Node name for an id; panics on out-of-range ids (internal misuse).
    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id as usize].name
    }

    pub fn out_edges(&self, id: NodeId) -> &[OutEdge] {
        &self.out[id as usize]
    }

    pub fn in_edges(&self, id: NodeId) -> &[InEdge] {
        &self.inc[id as usize]
    }

    /// All edges in `(src, dst, rel)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out.iter().enumerate().flat_map(|(src, list)| {
            list.iter().map(move |e| Edge {
                src: src as NodeId,
                rel: e.rel.clone(),
                dst: e.dst,
                weight: e.weight,
            })
        })
    }

    pub fn degree(&self, id: NodeId, direction: Direction) -> Result<usize, GraphError> {
        let idx = id as usize;
        if idx >= self.nodes.len() {
            return Err(GraphError::UnknownNode(id));
        }
        Ok(match direction {
            Direction::Out => self.out[idx].len(),
            Direction::In => self.inc[idx].len(),
            Direction::Both => self.out[idx].len() + self.inc[idx].len(),
        })
    }

    /// Selects the subgraph induced by `filter`: edges must match one of
    /// the relation types, carry weight >= the threshold (inclusive), and
    /// join two nodes whose types are both selected. Isolated nodes are
    /// dropped; surviving nodes keep their relative order under fresh
    /// dense ids.
    pub fn select_subgraph(&self, filter: &SubgraphFilter) -> TypedGraph {
        let keep_edge = |src: &Node, rel: &RelationType, dst: &Node, w: f64| {
            w >= filter.min_edge_weight
                && filter.rel_types.contains(rel)
                && filter.node_types.contains(&src.node_type)
                && filter.node_types.contains(&dst.node_type)
        };

        let mut touched = vec![false; self.nodes.len()];
        for (src, list) in self.out.iter().enumerate() {
            for e in list {
                if keep_edge(&self.nodes[src], &e.rel, &self.nodes[e.dst as usize], e.weight) {
                    touched[src] = true;
                    touched[e.dst as usize] = true;
                }
            }
        }

        let mut builder = GraphBuilder::new();
        let mut remap: HashMap<NodeId, NodeId> = HashMap::new();
        for node in &self.nodes {
            if touched[node.id as usize] {
                let new_id = builder.add_node(&node.name, node.node_type.clone(), node.weight);
                remap.insert(node.id, new_id);
            }
        }
        for (src, list) in self.out.iter().enumerate() {
            for e in list {
                if keep_edge(&self.nodes[src], &e.rel, &self.nodes[e.dst as usize], e.weight) {
                    builder.add_edge(
                        remap[&(src as NodeId)],
                        e.rel.clone(),
                        remap[&e.dst],
                        e.weight,
                    );
                }
            }
        }
        builder.build()
    }

    /// Stable content hash over nodes and edges (names, types, weights).
    pub fn fingerprint(&self) -> u64 {
        let mut acc: u64 = 0xcbf29ce484222325;
        let mut mix = |bytes: &[u8]| {
            acc = fnv1a64(&[&acc.to_le_bytes()[..], bytes].concat());
        };
        for n in &self.nodes {
            mix(n.name.as_bytes());
            mix(n.node_type.to_string().as_bytes());
            mix(&n.weight.to_bits().to_le_bytes());
        }
        for e in self.edges() {
            mix(self.nodes[e.src as usize].name.as_bytes());
            mix(e.rel.to_string().as_bytes());
            mix(self.nodes[e.dst as usize].name.as_bytes());
            mix(&e.weight.to_bits().to_le_bytes());
        }
        acc
    }

    /// Writes the graph back to the two-file TSV format. Accepted records
    /// round-trip bit-exactly: floats are printed with the shortest
    /// representation that re-parses to the same value.
    pub fn write_files(&self, nodes_path: &Path, edges_path: &Path) -> Result<(), GraphError> {
        let wrap = |path: &Path, source| GraphError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut nw = BufWriter::new(File::create(nodes_path).map_err(|e| wrap(nodes_path, e))?);
        for n in &self.nodes {
            writeln!(nw, "{}\t{}\t{}", n.name, n.node_type, n.weight)
                .map_err(|e| wrap(nodes_path, e))?;
        }
        nw.flush().map_err(|e| wrap(nodes_path, e))?;

        let mut ew = BufWriter::new(File::create(edges_path).map_err(|e| wrap(edges_path, e))?);
        for e in self.edges() {
            writeln!(
                ew,
                "{}\t{}\t{}\t{}",
                self.nodes[e.src as usize].name, e.rel, self.nodes[e.dst as usize].name, e.weight
            )
            .map_err(|e| wrap(edges_path, e))?;
        }
        ew.flush().map_err(|e| wrap(edges_path, e))?;
        Ok(())
    }
}

/// Criteria for `TypedGraph::select_subgraph`. The default keeps term and
/// form nodes, the seven standard relations, and edges of weight >= 60.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphFilter {
    pub node_types: BTreeSet<NodeType>,
    pub rel_types: BTreeSet<RelationType>,
    pub min_edge_weight: f64,
}

impl Default for SubgraphFilter {
    fn default() -> Self {
        SubgraphFilter {
            node_types: [NodeType::Term, NodeType::Form].into_iter().collect(),
            rel_types: RelationType::SUBGRAPH_DEFAULT.into_iter().collect(),
            min_edge_weight: 60.0,
        }
    }
}

/// Accumulates nodes and edges, then freezes into a `TypedGraph`.
/// Duplicate node names merge (first type wins, max weight kept);
/// duplicate `(src, rel, dst)` triples keep the max weight.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    name_index: HashMap<String, NodeId>,
    edges: HashMap<(NodeId, NodeId), Vec<(RelationType, f64)>>,
    edge_count: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, node_type: NodeType, weight: f64) -> NodeId {
        if let Some(&id) = self.name_index.get(name) {
            let node = &mut self.nodes[id as usize];
            node.weight = node.weight.max(weight);
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            id,
            name: name.to_string(),
            node_type,
            weight,
        });
        self.name_index.insert(name.to_string(), id);
        id
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    pub fn add_edge(&mut self, src: NodeId, rel: RelationType, dst: NodeId, weight: f64) {
        let rels = self.edges.entry((src, dst)).or_default();
        match rels.iter_mut().find(|(r, _)| *r == rel) {
            Some((_, w)) => *w = w.max(weight),
            None => {
                rels.push((rel, weight));
                self.edge_count += 1;
            }
        }
    }

    pub fn build(self) -> TypedGraph {
        let n = self.nodes.len();
        let mut out: Vec<Vec<OutEdge>> = vec![Vec::new(); n];
        let mut inc: Vec<Vec<InEdge>> = vec![Vec::new(); n];
        for ((src, dst), rels) in self.edges {
            for (rel, weight) in rels {
                out[src as usize].push(OutEdge {
                    dst,
                    rel: rel.clone(),
                    weight,
                });
                inc[dst as usize].push(InEdge { src, rel, weight });
            }
        }
        for list in &mut out {
            list.sort_by(|a, b| (a.dst, &a.rel).cmp(&(b.dst, &b.rel)));
        }
        for list in &mut inc {
            list.sort_by(|a, b| (a.src, &a.rel).cmp(&(b.src, &b.rel)));
        }
        TypedGraph {
            nodes: self.nodes,
            out,
            inc,
            name_index: self.name_index,
            edge_count: self.edge_count,
        }
    }
}

/// Which input file a rejected record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFile {
    Nodes,
    Edges,
}

/// One rejected input line, with the 1-based line number and reason.
#[derive(Debug, Clone)]
pub struct RecordIssue {
    pub file: RecordFile,
    pub line: usize,
    pub reason: String,
}

/// Accept/reject tallies from `ingest_graph`. Comment and blank lines are
/// not counted as records.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub nodes_accepted: usize,
    pub nodes_rejected: usize,
    pub edges_accepted: usize,
    pub edges_rejected: usize,
    pub issues: Vec<RecordIssue>,
}

/// Reads the two-file TSV format.
///
/// Nodes: `name<TAB>node_type<TAB>weight`. Edges:
/// `src_name<TAB>rel_type<TAB>dst_name<TAB>weight`. Lines starting with
/// `#` and blank lines are skipped. Malformed records and edges naming
/// unknown nodes are rejected and reported; if more than 10% of either
/// file's records fail, the whole ingest fails with `Format`.
pub fn ingest_graph(
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<(TypedGraph, IngestReport), GraphError> {
    let mut builder = GraphBuilder::new();
    let mut report = IngestReport::default();

    for (line_no, line) in read_records(nodes_path)? {
        match parse_node_line(&line) {
            Ok((name, node_type, weight)) => {
                builder.add_node(name, node_type, weight);
                report.nodes_accepted += 1;
            }
            Err(reason) => {
                report.nodes_rejected += 1;
                report.issues.push(RecordIssue {
                    file: RecordFile::Nodes,
                    line: line_no,
                    reason,
                });
            }
        }
    }
    check_failure_rate(
        nodes_path,
        report.nodes_rejected,
        report.nodes_accepted + report.nodes_rejected,
    )?;

    // Dangling edges are rejected but never fatal; only malformed lines
    // count toward the 10% format tolerance.
    let mut edges_malformed = 0usize;
    for (line_no, line) in read_records(edges_path)? {
        match parse_edge_line(&line) {
            Ok((src, rel, dst, weight)) => {
                match (builder.node_id(src), builder.node_id(dst)) {
                    (Some(s), Some(d)) => {
                        builder.add_edge(s, rel, d, weight);
                        report.edges_accepted += 1;
                    }
                    (missing_src, _) => {
                        let name = if missing_src.is_none() { src } else { dst };
                        report.edges_rejected += 1;
                        report.issues.push(RecordIssue {
                            file: RecordFile::Edges,
                            line: line_no,
                            reason: format!("dangling edge: unknown node {name:?}"),
                        });
                    }
                }
            }
            Err(reason) => {
                report.edges_rejected += 1;
                edges_malformed += 1;
                report.issues.push(RecordIssue {
                    file: RecordFile::Edges,
                    line: line_no,
                    reason,
                });
            }
        }
    }
    check_failure_rate(
        edges_path,
        edges_malformed,
        report.edges_accepted + report.edges_rejected,
    )?;

    Ok((builder.build(), report))
}

fn check_failure_rate(path: &Path, failed: usize, total: usize) -> Result<(), GraphError> {
    if failed * 10 > total {
        return Err(GraphError::Format {
            file: path.display().to_string(),
            failed,
            total,
        });
    }
    Ok(())
}

/// Yields `(line_number, contents)` for data lines, skipping comments and
/// blanks and tolerating CRLF endings.
fn read_records(path: &Path) -> Result<Vec<(usize, String)>, GraphError> {
    let file = File::open(path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GraphError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        records.push((idx + 1, line.to_string()));
    }
    Ok(records)
}

fn parse_weight(field: &str) -> Result<f64, String> {
    let w: f64 = field
        .parse()
        .map_err(|_| format!("bad weight {field:?}"))?;
    if !w.is_finite() || w < 0.0 {
        return Err(format!("weight must be a non-negative finite number, got {field:?}"));
    }
    Ok(w)
}

fn parse_node_line(line: &str) -> Result<(&str, NodeType, f64), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, got {}", fields.len()));
    }
    if fields[0].is_empty() {
        return Err("empty node name".to_string());
    }
    let node_type: NodeType = fields[1].parse().unwrap();
    Ok((fields[0], node_type, parse_weight(fields[2])?))
}

fn parse_edge_line(line: &str) -> Result<(&str, RelationType, &str, f64), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, got {}", fields.len()));
    }
    if fields[0].is_empty() || fields[2].is_empty() {
        return Err("empty endpoint name".to_string());
    }
    let rel: RelationType = fields[1].parse().unwrap();
    Ok((fields[0], rel, fields[2], parse_weight(fields[3])?))
}
