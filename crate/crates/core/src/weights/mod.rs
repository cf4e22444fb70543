//! Node weight functions: rules that pick, for each node, the subset of
//! other nodes whose attributes and labels train that node's predictor.
//!
//! | kind            | representation                  | size        |
//! |-----------------|---------------------------------|-------------|
//! | `activity_flat` | per-node weight list            | O(\|V\|)     |
//! | `degree_flat`   | per-node weight list            | O(\|V\|)     |
//! | `cluster`       | per-node community assignment   | O(\|V\|)     |
//! | `random`        | node id list                    | O(\|V\|)     |
//! | `bfs`           | network adjacency               | O(\|E\|)     |
//! | `activity_net`  | adjacency into top-ℓ exemplars  | O(\|V\|·ℓ)   |
//! | `degree_net`    | adjacency into top-ℓ exemplars  | O(\|V\|·ℓ)   |

mod louvain;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AttributeMatrix;
use crate::error::{Error, Result};
use crate::network::{ranking_similarity, EdgeSet};
use crate::seed::SeedBuilder;

pub use louvain::{louvain, modularity};

/// Fraction of nodes kept as exemplars by the exemplar-network weightings.
pub const DEFAULT_EXEMPLAR_FRACTION: f64 = 0.1;
/// Out-edges per node into the exemplar set; larger than any sampled `k`.
pub const DEFAULT_EXEMPLAR_NEIGHBORS: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    ActivityFlat,
    DegreeFlat,
    Cluster,
    Random,
    Bfs,
    ActivityNet,
    DegreeNet,
}

impl WeightKind {
    pub const ALL: [WeightKind; 7] = [
        WeightKind::ActivityFlat,
        WeightKind::DegreeFlat,
        WeightKind::Cluster,
        WeightKind::Random,
        WeightKind::Bfs,
        WeightKind::ActivityNet,
        WeightKind::DegreeNet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightKind::ActivityFlat => "activity_flat",
            WeightKind::DegreeFlat => "degree_flat",
            WeightKind::Cluster => "cluster",
            WeightKind::Random => "random",
            WeightKind::Bfs => "bfs",
            WeightKind::ActivityNet => "activity_net",
            WeightKind::DegreeNet => "degree_net",
        }
    }

    /// Whether building the weighting needs an inferred or explicit network.
    pub fn needs_network(self) -> bool {
        matches!(
            self,
            WeightKind::DegreeFlat | WeightKind::Cluster | WeightKind::Bfs | WeightKind::DegreeNet
        )
    }

    /// Whether the representation is an adjacency structure (and so can be rewired).
    pub fn is_adjacency(self) -> bool {
        matches!(self, WeightKind::Bfs | WeightKind::ActivityNet | WeightKind::DegreeNet)
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown weight kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeMode {
    In,
    Out,
    #[default]
    Total,
}

impl DegreeMode {
    fn degrees(self, edges: &EdgeSet) -> Vec<usize> {
        match self {
            DegreeMode::In => edges.in_degrees(),
            DegreeMode::Out => edges.out_degrees(),
            DegreeMode::Total => edges.total_degrees(),
        }
    }
}

/// Storage behind a weight function. List forms carry the node ids they
/// cover so that reach restriction can drop entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    WeightList { nodes: Vec<u32>, weights: Vec<f64> },
    Assignment { nodes: Vec<u32>, communities: Vec<u32> },
    Adjacency(EdgeSet),
    ExemplarAdjacency { exemplars: Vec<u32>, edges: EdgeSet },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeWeightModel {
    pub kind: WeightKind,
    pub representation: Representation,
    pub node_count: usize,
    /// Name of the network the weighting was derived from, if any.
    pub source_network: Option<String>,
    pub exemplar_fraction: f64,
    /// Set when the defining statistic was all-zero and uniform weights were used.
    pub uniform_fallback: bool,
}

impl NodeWeightModel {
    fn weight_list(kind: WeightKind, weights: Vec<f64>, source: Option<String>) -> Self {
        let n = weights.len();
        let fallback = n > 0 && weights.iter().all(|&w| w == 0.0);
        let weights = if fallback {
            log::warn!("{kind}: all weights are zero, falling back to uniform weights");
            vec![1.0; n]
        } else {
            weights
        };
        NodeWeightModel {
            kind,
            representation: Representation::WeightList {
                nodes: (0..n as u32).collect(),
                weights,
            },
            node_count: n,
            source_network: source,
            exemplar_fraction: DEFAULT_EXEMPLAR_FRACTION,
            uniform_fallback: fallback,
        }
    }

    pub fn is_adjacency(&self) -> bool {
        matches!(
            self.representation,
            Representation::Adjacency(_) | Representation::ExemplarAdjacency { .. }
        )
    }

    /// The adjacency behind an adjacency-class representation.
    pub fn adjacency(&self) -> Option<&EdgeSet> {
        match &self.representation {
            Representation::Adjacency(e) => Some(e),
            Representation::ExemplarAdjacency { edges, .. } => Some(edges),
            _ => None,
        }
    }

    /// Replaces the adjacency of an adjacency-class model (used by noise rewiring).
    pub fn with_adjacency(&self, edges: EdgeSet) -> Result<NodeWeightModel> {
        let representation = match &self.representation {
            Representation::Adjacency(_) => Representation::Adjacency(edges),
            Representation::ExemplarAdjacency { exemplars, .. } => Representation::ExemplarAdjacency {
                exemplars: exemplars.clone(),
                edges,
            },
            _ => return Err(Error::NotRewirable(self.kind.to_string())),
        };
        Ok(NodeWeightModel {
            representation,
            ..self.clone()
        })
    }

    /// Draws the training subset `U` for node `i` (never containing `i`).
    ///
    /// * weight lists: weighted sampling without replacement
    /// * assignments: uniform sample of `i`'s community (whole community if smaller than `k`)
    /// * adjacency forms: breadth-first order from `i`, shuffled within each depth
    pub fn sample_subset(&self, node: u32, k: usize, seed: u64) -> Vec<u32> {
        if k == 0 {
            return Vec::new();
        }
        let mut rng = SeedBuilder::new(seed).with_u64(node as u64).rng();
        match &self.representation {
            Representation::WeightList { nodes, weights } => {
                if self.kind == WeightKind::Random || weights.windows(2).all(|w| w[0] == w[1]) {
                    let mut pool: Vec<u32> = nodes
                        .iter()
                        .zip(weights)
                        .filter(|&(&v, &w)| v != node && w > 0.0)
                        .map(|(&v, _)| v)
                        .collect();
                    partial_shuffle(&mut pool, k, &mut rng)
                } else {
                    weighted_without_replacement(nodes, weights, node, k, &mut rng)
                }
            }
            Representation::Assignment { nodes, communities } => {
                let Some(pos) = nodes.iter().position(|&v| v == node) else {
                    return Vec::new();
                };
                let own = communities[pos];
                let mut pool: Vec<u32> = nodes
                    .iter()
                    .zip(communities)
                    .filter(|&(&v, &c)| c == own && v != node)
                    .map(|(&v, _)| v)
                    .collect();
                partial_shuffle(&mut pool, k, &mut rng)
            }
            Representation::Adjacency(edges) | Representation::ExemplarAdjacency { edges, .. } => {
                breadth_first(edges, node, k, &mut rng)
            }
        }
    }

    /// `W*`: the representation restricted to the reach set. Adjacency keeps
    /// edges with both endpoints reached; lists keep entries of reached nodes.
    pub fn restrict(&self, reach: &ReachSet) -> NodeWeightModel {
        let representation = match &self.representation {
            Representation::WeightList { nodes, weights } => {
                let (nodes, weights) = nodes
                    .iter()
                    .zip(weights)
                    .filter(|(v, _)| reach.contains(**v))
                    .map(|(&v, &w)| (v, w))
                    .unzip();
                Representation::WeightList { nodes, weights }
            }
            Representation::Assignment { nodes, communities } => {
                let (nodes, communities) = nodes
                    .iter()
                    .zip(communities)
                    .filter(|(v, _)| reach.contains(**v))
                    .map(|(&v, &c)| (v, c))
                    .unzip();
                Representation::Assignment { nodes, communities }
            }
            Representation::Adjacency(e) => Representation::Adjacency(e.induced(&reach.mask(self.node_count))),
            Representation::ExemplarAdjacency { exemplars, edges } => Representation::ExemplarAdjacency {
                exemplars: exemplars.iter().copied().filter(|&x| reach.contains(x)).collect(),
                edges: edges.induced(&reach.mask(self.node_count)),
            },
        };
        NodeWeightModel {
            representation,
            ..self.clone()
        }
    }
}

fn partial_shuffle(pool: &mut Vec<u32>, k: usize, rng: &mut impl Rng) -> Vec<u32> {
    let take = k.min(pool.len());
    let (chosen, _) = pool.partial_shuffle(rng, take);
    chosen.to_vec()
}

/// Sequential weighted draws with renormalization, via a Fenwick tree over
/// the weights.
fn weighted_without_replacement(nodes: &[u32], weights: &[f64], exclude: u32, k: usize, rng: &mut impl Rng) -> Vec<u32> {
    let n = nodes.len();
    let mut tree = vec![0.0f64; n + 1];
    let mut remaining = 0usize;
    let mut w = vec![0.0; n];
    for (p, (&v, &wt)) in nodes.iter().zip(weights).enumerate() {
        if v != exclude && wt > 0.0 {
            w[p] = wt;
            remaining += 1;
        }
    }
    for p in 0..n {
        let mut idx = p + 1;
        while idx <= n {
            tree[idx] += w[p];
            idx += idx & idx.wrapping_neg();
        }
    }
    let mut total: f64 = w.iter().sum();
    let mut out = Vec::with_capacity(k.min(remaining));
    while out.len() < k && remaining > 0 {
        let target = rng.random::<f64>() * total;
        // descend the tree for the first prefix sum exceeding target
        let mut pos = 0usize;
        let mut acc = 0.0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && acc + tree[next] <= target {
                pos = next;
                acc += tree[next];
            }
            step >>= 1;
        }
        // `pos` is 0-based slot; skip zero-weight slots reached through rounding
        let mut slot = pos.min(n - 1);
        if w[slot] == 0.0 {
            slot = (0..n)
                .rev()
                .find(|&s| w[s] > 0.0 && s <= slot)
                .or_else(|| (0..n).find(|&s| w[s] > 0.0))
                .unwrap();
        }
        out.push(nodes[slot]);
        let wt = w[slot];
        w[slot] = 0.0;
        total -= wt;
        remaining -= 1;
        let mut idx = slot + 1;
        while idx <= n {
            tree[idx] -= wt;
            idx += idx & idx.wrapping_neg();
        }
        if total <= 0.0 && remaining > 0 {
            total = w.iter().sum();
        }
    }
    out
}

fn breadth_first(edges: &EdgeSet, start: u32, k: usize, rng: &mut impl Rng) -> Vec<u32> {
    let n = edges.node_count();
    if start as usize >= n {
        return Vec::new();
    }
    let mut seen = vec![false; n];
    seen[start as usize] = true;
    let mut out = Vec::new();
    let mut frontier = vec![start];
    while !frontier.is_empty() && out.len() < k {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in edges.out_neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    next.push(v);
                }
            }
        }
        next.shuffle(rng);
        for &v in &next {
            if out.len() == k {
                break;
            }
            out.push(v);
        }
        frontier = next;
    }
    out
}

/// Nodes touched by at least one predictor: every evaluated node plus every
/// node in any sampled training subset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachSet {
    nodes: BTreeSet<u32>,
}

impl ReachSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all(node_count: usize) -> Self {
        ReachSet {
            nodes: (0..node_count as u32).collect(),
        }
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = u32>) -> Self {
        ReachSet {
            nodes: nodes.into_iter().collect(),
        }
    }

    /// Union of the evaluated nodes and their subsets.
    pub fn from_subsets<'a>(subsets: impl IntoIterator<Item = (u32, &'a [u32])>) -> Self {
        let mut r = ReachSet::new();
        for (node, subset) in subsets {
            r.add(node, subset);
        }
        r
    }

    pub fn add(&mut self, node: u32, subset: &[u32]) {
        self.nodes.insert(node);
        self.nodes.extend(subset.iter().copied());
    }

    pub fn merge(&mut self, other: &ReachSet) {
        self.nodes.extend(other.nodes.iter().copied());
    }

    pub fn contains(&self, node: u32) -> bool {
        self.nodes.contains(&node)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().copied()
    }

    pub fn mask(&self, node_count: usize) -> Vec<bool> {
        let mut m = vec![false; node_count];
        for &v in &self.nodes {
            if (v as usize) < node_count {
                m[v as usize] = true;
            }
        }
        m
    }
}

/// Importance weighting by number of non-zero attributes.
pub fn make_activity_flat(attrs: &AttributeMatrix) -> NodeWeightModel {
    let weights = attrs.nnz_counts().into_iter().map(|c| c as f64).collect();
    NodeWeightModel::weight_list(WeightKind::ActivityFlat, weights, None)
}

/// Importance weighting by node degree.
pub fn make_degree_flat(edges: &EdgeSet, mode: DegreeMode, source: Option<&str>) -> NodeWeightModel {
    let weights = mode.degrees(edges).into_iter().map(|d| d as f64).collect();
    NodeWeightModel::weight_list(WeightKind::DegreeFlat, weights, source.map(str::to_owned))
}

/// Uniform sampling over all nodes.
pub fn make_random(node_count: usize) -> NodeWeightModel {
    NodeWeightModel::weight_list(WeightKind::Random, vec![1.0; node_count], None)
}

/// Louvain communities of the undirected projection of `edges`.
pub fn make_cluster(edges: &EdgeSet, seed: u64, source: Option<&str>) -> NodeWeightModel {
    let n = edges.node_count();
    let communities = louvain(&edges.undirected_neighbors(), seed);
    NodeWeightModel {
        kind: WeightKind::Cluster,
        representation: Representation::Assignment {
            nodes: (0..n as u32).collect(),
            communities,
        },
        node_count: n,
        source_network: source.map(str::to_owned),
        exemplar_fraction: DEFAULT_EXEMPLAR_FRACTION,
        uniform_fallback: false,
    }
}

/// Breadth-first traversal over the network adjacency.
pub fn make_bfs(edges: &EdgeSet, source: Option<&str>) -> NodeWeightModel {
    NodeWeightModel {
        kind: WeightKind::Bfs,
        representation: Representation::Adjacency(edges.clone()),
        node_count: edges.node_count(),
        source_network: source.map(str::to_owned),
        exemplar_fraction: DEFAULT_EXEMPLAR_FRACTION,
        uniform_fallback: false,
    }
}

/// Size of the exemplar set: `⌈ℓ·|V|⌉`.
pub fn exemplar_count(node_count: usize, fraction: f64) -> usize {
    ((fraction * node_count as f64).ceil() as usize).min(node_count)
}

fn top_ranked(scores: &[usize], count: usize) -> Vec<u32> {
    let mut order: Vec<u32> = (0..scores.len() as u32).collect();
    order.sort_by(|&a, &b| scores[b as usize].cmp(&scores[a as usize]).then(a.cmp(&b)));
    order.truncate(count);
    order.sort_unstable();
    order
}

fn exemplar_network(
    kind: WeightKind,
    attrs: &AttributeMatrix,
    scores: &[usize],
    fraction: f64,
    neighbors: usize,
    source: Option<&str>,
) -> Result<NodeWeightModel> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("exemplar fraction must be in (0, 1], got {fraction}")));
    }
    let n = attrs.node_count();
    let exemplars = top_ranked(scores, exemplar_count(n, fraction));
    let adjacency: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = attrs.row(i as u32);
            let mut cand: Vec<(f64, u32)> = exemplars
                .iter()
                .filter(|&&x| x as usize != i)
                .map(|&x| (ranking_similarity(ri, attrs.row(x)), x))
                .collect();
            cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            cand.truncate(neighbors);
            let mut out: Vec<u32> = cand.into_iter().map(|c| c.1).collect();
            out.sort_unstable();
            out
        })
        .collect();
    Ok(NodeWeightModel {
        kind,
        representation: Representation::ExemplarAdjacency {
            exemplars,
            edges: EdgeSet::from_adjacency(true, adjacency)?,
        },
        node_count: n,
        source_network: source.map(str::to_owned),
        exemplar_fraction: fraction,
        uniform_fallback: false,
    })
}

/// KNN restricted to the top-ℓ most active nodes: every node links to its
/// `neighbors` most similar exemplars.
pub fn make_activity_net(attrs: &AttributeMatrix, fraction: f64, neighbors: usize) -> Result<NodeWeightModel> {
    exemplar_network(WeightKind::ActivityNet, attrs, &attrs.nnz_counts(), fraction, neighbors, None)
}

/// As [`make_activity_net`] with exemplars ranked by degree in `edges`.
pub fn make_degree_net(
    edges: &EdgeSet,
    attrs: &AttributeMatrix,
    fraction: f64,
    neighbors: usize,
    mode: DegreeMode,
    source: Option<&str>,
) -> Result<NodeWeightModel> {
    exemplar_network(WeightKind::DegreeNet, attrs, &mode.degrees(edges), fraction, neighbors, source)
}
