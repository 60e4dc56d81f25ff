//! Synthetic planted-relation benchmark generator.
//!
//! Nodes live in communities; each relation holds between community
//! pairs fixed by its rule, so relation presence is decodable from
//! community membership alone and a trained pipeline can be scored
//! against known structure. A configurable fraction of edges is noise
//! (sampled from pairs that violate the rule), and a ground-truth table
//! is written alongside the graph for test assertions.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lexlink_core::graph::{GraphBuilder, NodeType, RelationType, TypedGraph};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How one relation's edges are placed between communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationRule {
    /// Both endpoints in the same community.
    IntraCommunity {
        edges: usize,
        weight_range: Option<(f64, f64)>,
    },
    /// From community c to its parent c-1 (chain hierarchy).
    ChildToParent {
        edges: usize,
        weight_range: Option<(f64, f64)>,
    },
    /// Exact reverse of every edge of another relation.
    Mirror { of: RelationType },
    /// From community a to community b for each listed (a, b).
    CommunityPairs {
        pairs: Vec<(usize, usize)>,
        edges: usize,
        weight_range: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_communities: usize,
    pub nodes_per_community: usize,
    /// Empty map means `default_rules(n_communities)`.
    pub relation_rules: BTreeMap<RelationType, RelationRule>,
    /// Fallback weight range for rules that set none.
    pub edge_weight_range: (f64, f64),
    /// Probability that a generated edge violates its rule.
    pub noise_rate: f64,
    /// Extra non-term nodes wired into the graph; the subgraph stage
    /// must drop them, which exercises the node-type filter end to end.
    pub decoy_nodes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_communities: 4,
            nodes_per_community: 50,
            relation_rules: BTreeMap::new(),
            edge_weight_range: (81.0, 160.0),
            noise_rate: 0.05,
            decoy_nodes: 2,
            seed: 0,
        }
    }
}

/// Default rule set: synonymy and sense refinement inside communities
/// (heavier weights, so walks stay local), hypernymy down a community
/// chain with mirrored hyponymy, and location/agent relations on
/// distance-2 community jumps. For 4 communities every ordered
/// community pair hosts at most one relation.
pub fn default_rules(n_communities: usize) -> BTreeMap<RelationType, RelationRule> {
    let c = n_communities;
    let dense = Some((100.0, 200.0));
    let mut rules = BTreeMap::new();
    rules.insert(
        RelationType::Syn,
        RelationRule::IntraCommunity {
            edges: 400 * c,
            weight_range: dense,
        },
    );
    rules.insert(
        RelationType::RaffSem,
        RelationRule::IntraCommunity {
            edges: 200 * c,
            weight_range: dense,
        },
    );
    rules.insert(
        RelationType::Isa,
        RelationRule::ChildToParent {
            edges: 100 * c,
            weight_range: None,
        },
    );
    rules.insert(
        RelationType::Hypo,
        RelationRule::Mirror {
            of: RelationType::Isa,
        },
    );
    let forward: Vec<(usize, usize)> = (0..c.saturating_sub(2)).map(|i| (i, i + 2)).collect();
    let backward: Vec<(usize, usize)> = (0..c.saturating_sub(2)).map(|i| (i + 2, i)).collect();
    rules.insert(
        RelationType::Lieu,
        RelationRule::CommunityPairs {
            pairs: forward,
            edges: 100 * c,
            weight_range: None,
        },
    );
    rules.insert(
        RelationType::Agent,
        RelationRule::CommunityPairs {
            pairs: backward,
            edges: 100 * c,
            weight_range: None,
        },
    );
    rules.insert(
        RelationType::AgentInv,
        RelationRule::CommunityPairs {
            pairs: vec![(0, c - 1), (c - 1, 0)],
            edges: 100 * c,
            weight_range: None,
        },
    );
    rules
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_communities == 0 || self.nodes_per_community == 0 {
            return Err("synthetic: need at least one community and one node".into());
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err("synthetic: noise_rate must lie in [0, 1)".into());
        }
        let check_range = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
                Err("synthetic: weight range must be 0 <= lo <= hi".to_string())
            } else {
                Ok(())
            }
        };
        check_range(self.edge_weight_range)?;
        for (rel, rule) in &self.relation_rules {
            match rule {
                RelationRule::IntraCommunity { weight_range, .. }
                | RelationRule::ChildToParent { weight_range, .. }
                | RelationRule::CommunityPairs { weight_range, .. } => {
                    if let Some(r) = weight_range {
                        check_range(*r)?;
                    }
                }
                RelationRule::Mirror { of } => {
                    let source = self.relation_rules.get(of);
                    if matches!(source, None | Some(RelationRule::Mirror { .. })) {
                        return Err(format!(
                            "synthetic: {rel} mirrors {of}, which has no concrete rule"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn rules(&self) -> BTreeMap<RelationType, RelationRule> {
        if self.relation_rules.is_empty() {
            default_rules(self.n_communities)
        } else {
            self.relation_rules.clone()
        }
    }
}

/// One generated edge plus its provenance, as written to the truth file.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub src: String,
    pub rel: RelationType,
    pub dst: String,
    pub weight: f64,
    pub origin: EdgeOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrigin {
    Rule,
    Noise,
    Decoy,
}

impl EdgeOrigin {
    fn as_str(&self) -> &'static str {
        match self {
            EdgeOrigin::Rule => "rule",
            EdgeOrigin::Noise => "noise",
            EdgeOrigin::Decoy => "decoy",
        }
    }
}

pub struct GeneratedGraph {
    pub graph: TypedGraph,
    pub truth: Vec<TruthRecord>,
}

/// Community index of a node id under the generator's layout.
pub fn community_of(spec: &SyntheticSpec, node: u32) -> Option<usize> {
    let community_nodes = (spec.n_communities * spec.nodes_per_community) as u32;
    (node < community_nodes).then(|| node as usize / spec.nodes_per_community)
}

/// Generates the graph in memory. Node `i` of community `c` is named
/// `c{c}_n{i}`; decoys are `pos_{j}` with node type `n_pos`.
pub fn generate(spec: &SyntheticSpec) -> Result<GeneratedGraph, String> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut builder = GraphBuilder::new();

    let m = spec.nodes_per_community;
    for c in 0..spec.n_communities {
        for i in 0..m {
            builder.add_node(
                &format!("c{c}_n{i}"),
                NodeType::Term,
                rng.gen_range(1.0..100.0),
            );
        }
    }
    let community_node_count = (spec.n_communities * m) as u32;
    let decoys: Vec<u32> = (0..spec.decoy_nodes)
        .map(|j| {
            builder.add_node(
                &format!("pos_{j}"),
                NodeType::Other("n_pos".to_string()),
                rng.gen_range(1.0..100.0),
            )
        })
        .collect();

    let rules = spec.rules();
    let mut truth: Vec<TruthRecord> = Vec::new();
    let mut used: HashSet<(u32, String, u32)> = HashSet::new();
    let mut generated: BTreeMap<RelationType, Vec<(u32, u32, f64, EdgeOrigin)>> = BTreeMap::new();

    // Concrete rules first, in map order; mirrors afterwards.
    for (rel, rule) in rules.iter().filter(|(_, r)| !matches!(r, RelationRule::Mirror { .. })) {
        let (target_edges, weight_range, allowed): (usize, (f64, f64), PairSet) = match rule {
            RelationRule::IntraCommunity {
                edges,
                weight_range,
            } => (
                *edges,
                weight_range.unwrap_or(spec.edge_weight_range),
                PairSet::Intra,
            ),
            RelationRule::ChildToParent {
                edges,
                weight_range,
            } => (
                *edges,
                weight_range.unwrap_or(spec.edge_weight_range),
                PairSet::Chain,
            ),
            RelationRule::CommunityPairs {
                pairs,
                edges,
                weight_range,
            } => (
                *edges,
                weight_range.unwrap_or(spec.edge_weight_range),
                PairSet::Listed(pairs.clone()),
            ),
            RelationRule::Mirror { .. } => unreachable!(),
        };

        let mut edges_for_rel = Vec::with_capacity(target_edges);
        'edges: for _ in 0..target_edges {
            // The noise decision comes first so the realized noise
            // fraction stays an unbiased Bernoulli(noise_rate) count;
            // the pair is then rejection-sampled within that class.
            let noise = rng.gen::<f64>() < spec.noise_rate;
            let mut failures = 0usize;
            let (src, dst) = loop {
                if failures > 2000 {
                    // pair class saturated or empty; stop placing
                    break 'edges;
                }
                failures += 1;
                let src = rng.gen_range(0..community_node_count);
                let dst = rng.gen_range(0..community_node_count);
                if src == dst {
                    continue;
                }
                let allowed_pair = allowed.contains(
                    community_of(spec, src).unwrap(),
                    community_of(spec, dst).unwrap(),
                );
                if allowed_pair != !noise {
                    continue;
                }
                if used.contains(&(src, rel.to_string(), dst)) {
                    continue;
                }
                break (src, dst);
            };
            used.insert((src, rel.to_string(), dst));
            let weight = rng.gen_range(weight_range.0..weight_range.1);
            let origin = if noise {
                EdgeOrigin::Noise
            } else {
                EdgeOrigin::Rule
            };
            edges_for_rel.push((src, dst, weight, origin));
        }
        generated.insert(rel.clone(), edges_for_rel);
    }

    for (rel, rule) in &rules {
        if let RelationRule::Mirror { of } = rule {
            let mirrored: Vec<(u32, u32, f64, EdgeOrigin)> = generated
                .get(of)
                .map(|edges| {
                    edges
                        .iter()
                        .map(|&(src, dst, w, origin)| (dst, src, w, origin))
                        .collect()
                })
                .unwrap_or_default();
            generated.insert(rel.clone(), mirrored);
        }
    }

    for (rel, edges) in &generated {
        for &(src, dst, weight, origin) in edges {
            builder.add_edge(src, rel.clone(), dst, weight);
            truth.push(TruthRecord {
                src: format!(
                    "c{}_n{}",
                    community_of(spec, src).unwrap(),
                    src as usize % m
                ),
                rel: rel.clone(),
                dst: format!(
                    "c{}_n{}",
                    community_of(spec, dst).unwrap(),
                    dst as usize % m
                ),
                weight,
                origin,
            });
        }
    }

    // Wire each decoy to a few community nodes; these edges must fall to
    // the node-type filter, never reaching walks or labels. They use the
    // non-label refinement relation so the isa/hypo mirror stays exact.
    for &decoy in &decoys {
        for _ in 0..3 {
            let other = rng.gen_range(0..community_node_count);
            let weight = rng.gen_range(spec.edge_weight_range.0..spec.edge_weight_range.1);
            builder.add_edge(decoy, RelationType::RaffSem, other, weight);
            truth.push(TruthRecord {
                src: format!("pos_{}", decoy - community_node_count),
                rel: RelationType::RaffSem,
                dst: format!(
                    "c{}_n{}",
                    community_of(spec, other).unwrap(),
                    other as usize % m
                ),
                weight,
                origin: EdgeOrigin::Decoy,
            });
        }
    }

    Ok(GeneratedGraph {
        graph: builder.build(),
        truth,
    })
}

enum PairSet {
    Intra,
    Chain,
    Listed(Vec<(usize, usize)>),
}

impl PairSet {
    fn contains(&self, a: usize, b: usize) -> bool {
        match self {
            PairSet::Intra => a == b,
            PairSet::Chain => a == b + 1,
            PairSet::Listed(pairs) => pairs.contains(&(a, b)),
        }
    }
}

/// Generates and writes the node/edge TSV files plus the ground-truth
/// table (`src  rel  dst  weight  origin`).
pub fn generate_files(
    spec: &SyntheticSpec,
    nodes_path: &Path,
    edges_path: &Path,
    truth_path: &Path,
) -> Result<GeneratedGraph, String> {
    let out = generate(spec)?;
    out.graph
        .write_files(nodes_path, edges_path)
        .map_err(|e| e.to_string())?;
    let mut w = BufWriter::new(File::create(truth_path).map_err(|e| e.to_string())?);
    for rec in &out.truth {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            rec.src,
            rec.rel,
            rec.dst,
            rec.weight,
            rec.origin.as_str()
        )
        .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;
    Ok(out)
}
