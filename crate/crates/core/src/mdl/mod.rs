//! Encoding cost of predictors and weight functions, and the efficiency
//! score built from it: correct predictions per compressed byte.

mod canon;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::EdgeSet;
use crate::weights::{NodeWeightModel, Representation, WeightKind};

pub use canon::{format_real, Canon, Canonical};

/// Subset sizes tried for every node; the largest is the cap on κ.
pub const DEFAULT_K_GRID: [usize; 7] = [5, 10, 25, 50, 75, 100, 150];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    #[default]
    Lz4,
    Deflate,
}

impl Codec {
    pub fn compress(self, bytes: &[u8]) -> Vec<u8> {
        match self {
            Codec::Lz4 => {
                let mut enc = lz4_flex::frame::FrameEncoder::new(Vec::new());
                enc.write_all(bytes).expect("writing to a Vec cannot fail");
                enc.finish().expect("writing to a Vec cannot fail")
            }
            Codec::Deflate => {
                let mut enc = flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::default());
                enc.write_all(bytes).expect("writing to a Vec cannot fail");
                enc.finish().expect("writing to a Vec cannot fail")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub object_id: String,
    pub raw_bytes: usize,
    pub compressed_bytes: usize,
}

pub fn serialize_canonical<T: Canonical + ?Sized>(object: &T) -> Result<Vec<u8>> {
    object.canon().to_bytes()
}

/// Compressed length of the canonical form.
pub fn cost<T: Canonical + ?Sized>(object: &T, codec: Codec) -> Result<usize> {
    Ok(codec.compress(&serialize_canonical(object)?).len())
}

pub fn cost_report<T: Canonical + ?Sized>(object_id: &str, object: &T, codec: Codec) -> Result<CostReport> {
    let raw = serialize_canonical(object)?;
    Ok(CostReport {
        object_id: object_id.to_owned(),
        raw_bytes: raw.len(),
        compressed_bytes: codec.compress(&raw).len(),
    })
}

impl Canonical for Canon {
    fn canon(&self) -> Canon {
        self.clone()
    }
}

impl Canonical for EdgeSet {
    /// Only nodes with out-edges are listed, as `[src, dst...]` rows.
    fn canon(&self) -> Canon {
        let rows = self
            .adjacency()
            .iter()
            .enumerate()
            .filter(|(_, out)| !out.is_empty())
            .map(|(src, out)| {
                let mut row = Vec::with_capacity(out.len() + 1);
                row.push(Canon::Int(src as i64));
                row.extend(out.iter().map(|&d| Canon::Int(d as i64)));
                Canon::Array(row)
            })
            .collect();
        Canon::object([("directed", Canon::Bool(self.directed())), ("edges", Canon::Array(rows))])
    }
}

impl Canonical for Representation {
    fn canon(&self) -> Canon {
        match self {
            Representation::WeightList { nodes, weights } => Canon::object([
                ("nodes", Canon::ints(nodes)),
                ("weights", Canon::reals(weights)),
            ]),
            Representation::Assignment { nodes, communities } => Canon::object([
                ("communities", Canon::ints(communities)),
                ("nodes", Canon::ints(nodes)),
            ]),
            Representation::Adjacency(e) => e.canon(),
            Representation::ExemplarAdjacency { exemplars, edges } => Canon::object([
                ("edges", edges.canon()),
                ("exemplars", Canon::ints(exemplars)),
            ]),
        }
    }
}

impl Canonical for NodeWeightModel {
    /// The uniform sampler carries no weights, just the node list.
    fn canon(&self) -> Canon {
        let body = match (&self.kind, &self.representation) {
            (WeightKind::Random, Representation::WeightList { nodes, .. }) => {
                Canon::object([("nodes", Canon::ints(nodes))])
            }
            (_, r) => r.canon(),
        };
        Canon::object([("kind", Canon::str(self.kind.as_str())), ("repr", body)])
    }
}

/// Efficiency of one node's best subset size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEfficiency {
    pub node: u32,
    pub kappa: usize,
    pub correct: f64,
    pub cost: f64,
    pub efficiency: f64,
}

/// `max_k correct_k / cost_k` and its argmax, scanning `k_grid` in ascending
/// order so ties resolve to the smallest `k`.
pub fn node_efficiency(k_grid: &[usize], correct: &[f64], cost: &[f64]) -> Result<(f64, usize)> {
    if k_grid.is_empty() {
        return Err(Error::Empty("k grid"));
    }
    if correct.len() != k_grid.len() || cost.len() != k_grid.len() {
        return Err(Error::InvalidParameter("k grid, correct and cost lengths differ".into()));
    }
    let mut order: Vec<usize> = (0..k_grid.len()).collect();
    order.sort_by_key(|&j| k_grid[j]);
    let mut best = (0.0, k_grid[order[0]]);
    for j in order {
        if !(cost[j] > 0.0) || !correct[j].is_finite() || correct[j] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "k = {}: need cost > 0 and finite correct >= 0, got ({}, {})",
                k_grid[j], correct[j], cost[j]
            )));
        }
        let e = correct[j] / cost[j];
        if e > best.0 {
            best = (e, k_grid[j]);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub model_id: String,
    pub nodes: Vec<NodeEfficiency>,
    pub taskcorrect: f64,
    pub taskcost: f64,
    pub netcost: f64,
    pub efficiency: f64,
}

/// `taskcorrect / (taskcost + netcost)` with sums taken at each node's κ.
pub fn total_efficiency(model_id: &str, nodes: Vec<NodeEfficiency>, netcost: f64) -> Result<EfficiencyRecord> {
    if !(netcost > 0.0) || !netcost.is_finite() {
        return Err(Error::InvalidParameter(format!("netcost must be positive, got {netcost}")));
    }
    // sum in node order so the result does not depend on how records were gathered
    let mut sorted = nodes;
    sorted.sort_by(|a, b| a.node.cmp(&b.node).then(a.kappa.cmp(&b.kappa)));
    let taskcorrect: f64 = sorted.iter().map(|n| n.correct).sum();
    let taskcost: f64 = sorted.iter().map(|n| n.cost).sum();
    Ok(EfficiencyRecord {
        model_id: model_id.to_owned(),
        efficiency: taskcorrect / (taskcost + netcost),
        nodes: sorted,
        taskcorrect,
        taskcost,
        netcost,
    })
}
