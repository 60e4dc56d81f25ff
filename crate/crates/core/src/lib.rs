//! Link prediction over typed, weighted lexical-semantic graphs.
//!
//! The pipeline: ingest a multi-relational graph from TSV edge lists,
//! select a subgraph by node type / relation type / edge weight, generate
//! second-order biased random walks, train skip-gram embeddings with
//! negative sampling, assemble an edge dataset with per-relation binary
//! labels, fit one random forest per predictable relation, and report
//! precision/recall/F1/accuracy per relation plus macro averages.
//!
//! Every stage is seedable and deterministic in single-worker mode.

pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod forest;
pub mod graph;
pub mod rng;
pub mod walk;
