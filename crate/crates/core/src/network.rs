//! Edge sets inferred from attribute similarity, explicit edge lists, and
//! out-degree-preserving rewiring.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeMatrix, IdMap};
use crate::error::{Error, Result};
use crate::seed::SeedBuilder;
use crate::sparse::SparseVec;

/// Density (fraction of `n²`) used for `dense` similarity networks.
pub const DENSE_DENSITY: f64 = 0.01;
/// Density used for `sparse` similarity networks.
pub const SPARSE_DENSITY: f64 = 0.0025;

/// A directed edge set stored as sorted out-neighbor lists. Undirected
/// networks are stored with both directions present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    directed: bool,
    adjacency: Vec<Vec<u32>>,
}

/// Counts of input pairs discarded while building an [`EdgeSet`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl EdgeSet {
    pub fn empty(node_count: usize, directed: bool) -> Self {
        EdgeSet {
            directed,
            adjacency: vec![Vec::new(); node_count],
        }
    }

    /// Builds from `(src, dst)` pairs, dropping self-loops and duplicates.
    /// For undirected sets each pair is stored in both directions.
    ///
    /// # Panics
    /// If an id is `>= node_count`.
    pub fn from_pairs(
        node_count: usize,
        pairs: impl IntoIterator<Item = (u32, u32)>,
        directed: bool,
    ) -> (EdgeSet, DropReport) {
        let mut report = DropReport::default();
        let mut adjacency = vec![Vec::new(); node_count];
        for (s, d) in pairs {
            assert!((s as usize) < node_count && (d as usize) < node_count, "edge ({s},{d}) out of range");
            if s == d {
                report.self_loops += 1;
                continue;
            }
            adjacency[s as usize].push(d);
            if !directed {
                adjacency[d as usize].push(s);
            }
        }
        let mut stored = 0usize;
        let mut raw = 0usize;
        for list in &mut adjacency {
            raw += list.len();
            list.sort_unstable();
            list.dedup();
            stored += list.len();
        }
        report.duplicates = if directed { raw - stored } else { (raw - stored) / 2 };
        (EdgeSet { directed, adjacency }, report)
    }

    /// Builds from per-node out-lists, validating the invariants.
    pub fn from_adjacency(directed: bool, mut adjacency: Vec<Vec<u32>>) -> Result<EdgeSet> {
        let n = adjacency.len();
        for (i, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!("duplicate out-edge at node {i}")));
            }
            if list.iter().any(|&j| j as usize >= n || j as usize == i) {
                return Err(Error::InvalidParameter(format!("invalid out-edge at node {i}")));
            }
        }
        Ok(EdgeSet { directed, adjacency })
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of stored directed edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn out_neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.adjacency
    }

    pub fn contains(&self, src: u32, dst: u32) -> bool {
        self.adjacency[src as usize].binary_search(&dst).is_ok()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for list in &self.adjacency {
            for &j in list {
                deg[j as usize] += 1;
            }
        }
        deg
    }

    /// In-degree plus out-degree.
    pub fn total_degrees(&self) -> Vec<usize> {
        self.in_degrees()
            .into_iter()
            .zip(self.out_degrees())
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Sorted neighbor lists of the undirected projection.
    pub fn undirected_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb = self.adjacency.clone();
        for (i, list) in self.adjacency.iter().enumerate() {
            for &j in list {
                nb[j as usize].push(i as u32);
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }

    /// Keeps only edges whose endpoints both satisfy `keep`.
    pub fn induced(&self, keep: &[bool]) -> EdgeSet {
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .map(|(i, list)| {
                if keep[i] {
                    list.iter().copied().filter(|&j| keep[j as usize]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        EdgeSet {
            directed: self.directed,
            adjacency,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().map(move |&j| (i as u32, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Knn,
    Threshold,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityLabel {
    Sparse,
    Dense,
    Social,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
}

/// How the target edge count ρ is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeBudget {
    /// Fixed ρ.
    Rho(usize),
    /// ρ = density · n².
    Density(f64),
    /// ρ = fraction · |E_explicit|.
    ExplicitFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModelSpec {
    pub name: String,
    pub kind: NetworkKind,
    pub budget: EdgeBudget,
    pub density_label: DensityLabel,
    #[serde(default)]
    pub similarity: Similarity,
}

impl NetworkModelSpec {
    pub fn knn(name: &str, rho: usize) -> Self {
        NetworkModelSpec {
            name: name.into(),
            kind: NetworkKind::Knn,
            budget: EdgeBudget::Rho(rho),
            density_label: DensityLabel::Dense,
            similarity: Similarity::Cosine,
        }
    }

    pub fn threshold(name: &str, rho: usize) -> Self {
        NetworkModelSpec {
            kind: NetworkKind::Threshold,
            ..Self::knn(name, rho)
        }
    }

    pub fn explicit(name: &str) -> Self {
        NetworkModelSpec {
            name: name.into(),
            kind: NetworkKind::Explicit,
            budget: EdgeBudget::ExplicitFraction(1.0),
            density_label: DensityLabel::Social,
            similarity: Similarity::Cosine,
        }
    }

    /// Similarity network at one of the named densities.
    pub fn with_density(name: &str, kind: NetworkKind, label: DensityLabel) -> Self {
        let density = match label {
            DensityLabel::Sparse => SPARSE_DENSITY,
            _ => DENSE_DENSITY,
        };
        NetworkModelSpec {
            name: name.into(),
            kind,
            budget: EdgeBudget::Density(density),
            density_label: label,
            similarity: Similarity::Cosine,
        }
    }

    /// Resolves ρ for a node count and optional explicit network size.
    pub fn target_edges(&self, node_count: usize, explicit_edges: Option<usize>) -> Result<usize> {
        match self.budget {
            EdgeBudget::Rho(r) => Ok(r),
            EdgeBudget::Density(d) if d >= 0.0 && d.is_finite() => {
                Ok((d * (node_count * node_count) as f64).floor() as usize)
            }
            EdgeBudget::ExplicitFraction(f) if f >= 0.0 && f.is_finite() => explicit_edges
                .map(|e| (f * e as f64).floor() as usize)
                .ok_or_else(|| Error::Config(format!("network {} needs an explicit edge list", self.name))),
            _ => Err(Error::Config(format!("network {}: invalid edge budget", self.name))),
        }
    }

    /// Builds the network over `attrs`. Explicit networks return `explicit`.
    pub fn build(&self, attrs: &AttributeMatrix, explicit: Option<&EdgeSet>) -> Result<EdgeSet> {
        let rho = self.target_edges(attrs.node_count(), explicit.map(EdgeSet::edge_count))?;
        match self.kind {
            NetworkKind::Knn => Ok(build_knn(attrs, rho)),
            NetworkKind::Threshold => Ok(build_threshold(attrs, rho)),
            NetworkKind::Explicit => explicit
                .cloned()
                .ok_or_else(|| Error::Config(format!("network {} needs an explicit edge list", self.name))),
        }
    }
}

/// Cosine similarity; 0 when either vector is all-zero.
pub fn cosine_similarity(a: &SparseVec, b: &SparseVec) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(-1.0, 1.0)
}

/// Cosine rounded to 12 decimals for ranking, so similarities that are equal
/// up to floating-point error tie and fall to the id rule.
pub fn ranking_similarity(a: &SparseVec, b: &SparseVec) -> f64 {
    (cosine_similarity(a, b) * 1e12).round() / 1e12
}

/// Out-degree of a KNN network with target edge count `rho` on `n` nodes.
pub fn knn_out_degree(n: usize, rho: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (rho / n).min(n - 1)
}

/// Descending similarity, ascending id.
fn by_similarity(a: &(f64, u32), b: &(f64, u32)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Directed KNN network: each node links to its `⌊ρ/|V|⌋` most similar other
/// nodes (ties to the lower id).
pub fn build_knn(attrs: &AttributeMatrix, rho: usize) -> EdgeSet {
    let n = attrs.node_count();
    let k = knn_out_degree(n, rho);
    if k == 0 {
        log::warn!("KNN with rho={rho} on {n} nodes has out-degree 0; returning an empty edge set");
        return EdgeSet::empty(n, true);
    }
    let adjacency = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = &attrs.rows[i];
            let mut cand: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (ranking_similarity(ri, &attrs.rows[j]), j as u32))
                .collect();
            top_k(&mut cand, k)
        })
        .collect();
    EdgeSet {
        directed: true,
        adjacency,
    }
}

fn top_k(cand: &mut Vec<(f64, u32)>, k: usize) -> Vec<u32> {
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_similarity);
        cand.truncate(k);
    }
    let mut out: Vec<u32> = cand.iter().map(|c| c.1).collect();
    out.sort_unstable();
    out
}

/// Threshold network: the `ρ` most similar unordered pairs, stored
/// symmetrically. Boundary ties go to the lexicographically smaller pair.
pub fn build_threshold(attrs: &AttributeMatrix, rho: usize) -> EdgeSet {
    let n = attrs.node_count();
    let total = n * n.saturating_sub(1) / 2;
    let budget = rho.min(total);
    if budget == 0 {
        return EdgeSet::empty(n, false);
    }
    let mut pairs: Vec<(f64, u32, u32)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ri = &attrs.rows[i];
            (i + 1..n).map(move |j| (ranking_similarity(ri, &attrs.rows[j]), i as u32, j as u32))
        })
        .collect();
    let order = |a: &(f64, u32, u32), b: &(f64, u32, u32)| {
        b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    if budget < pairs.len() {
        pairs.select_nth_unstable_by(budget - 1, order);
        pairs.truncate(budget);
    }
    EdgeSet::from_pairs(n, pairs.into_iter().map(|(_, i, j)| (i, j)), false).0
}

/// Loads a directed `src<TAB>dst` edge list whose ids are original node ids.
pub fn load_explicit(path: &Path, nodes: &IdMap) -> Result<(EdgeSet, DropReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(['\t', ' ', ',']).filter(|f| !f.is_empty());
        let (Some(s), Some(d)) = (fields.next(), fields.next()) else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno as u64 + 1,
                msg: "expected `src<TAB>dst`".into(),
            });
        };
        let lookup = |id: &str| nodes.lookup(id).ok_or_else(|| Error::UnknownNode(id.to_owned()));
        pairs.push((lookup(s)?, lookup(d)?));
    }
    let (edges, report) = EdgeSet::from_pairs(nodes.len(), pairs, true);
    if report.self_loops + report.duplicates > 0 {
        log::info!(
            "{}: dropped {} self-loops and {} duplicate edges",
            path.display(),
            report.self_loops,
            report.duplicates
        );
    }
    Ok((edges, report))
}

/// Writes `src<TAB>dst` lines in dense ids.
pub fn write_edge_list(path: &Path, edges: &EdgeSet) -> Result<()> {
    let mut out = String::new();
    for (s, d) in edges.pairs() {
        out.push_str(&format!("{s}\t{d}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Out-degree-preserving randomization: each out-edge `(i, j)` is, with
/// probability `p`, retargeted to a uniform node of `V ∖ {i}` not already an
/// out-neighbor of `i`. Nodes linked to every other node keep their edges.
pub fn rewire(edges: &EdgeSet, p: f64, seed: u64) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("rewiring probability must be in [0,1], got {p}")));
    }
    if p == 0.0 {
        return Ok(edges.clone());
    }
    let n = edges.node_count();
    let adjacency = (0..n)
        .into_par_iter()
        .map(|i| {
            let original = &edges.adjacency[i];
            if original.len() + 1 >= n {
                return original.clone();
            }
            let mut rng = SeedBuilder::new(seed).with_u64(i as u64).rng();
            let mut current: HashSet<u32> = original.iter().copied().collect();
            for &j in original {
                if !rng.random_bool(p) {
                    continue;
                }
                let target = loop {
                    let u = rng.random_range(0..n as u32 - 1);
                    let u = if u >= i as u32 { u + 1 } else { u };
                    if !current.contains(&u) {
                        break u;
                    }
                };
                current.remove(&j);
                current.insert(target);
            }
            let mut out: Vec<u32> = current.into_iter().collect();
            out.sort_unstable();
            out
        })
        .collect();
    Ok(EdgeSet {
        directed: true,
        adjacency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use crate::dataset::planted_communities;
    use std::io::Write;

    fn sv(p: &[(u32, f64)]) -> SparseVec {
        SparseVec::from_pairs(p.to_vec())
    }

    fn matrix(rows: Vec<SparseVec>) -> AttributeMatrix {
        AttributeMatrix { rows, item_count: 8 }
    }

    #[test]
    fn cosine_examples() {
        let a = sv(&[(1, 2.0)]);
        assert_eq!(cosine_similarity(&a, &a), 1.0);
        assert_eq!(cosine_similarity(&sv(&[(0, 1.0)]), &sv(&[(3, 5.0)])), 0.0);
        let s = cosine_similarity(&sv(&[(0, 1.0), (1, 2.0)]), &sv(&[(0, 2.0), (1, 1.0)]));
        assert!((s - 0.8).abs() < 1e-15);
        assert_eq!(cosine_similarity(&SparseVec::empty(), &a), 0.0);
    }

    #[test]
    fn knn_identical_nodes_break_ties_low() {
        let rows = vec![sv(&[(0, 1.0)]); 3];
        let e = build_knn(&matrix(rows), 3);
        assert_eq!(e.adjacency, vec![vec![1], vec![0], vec![0]]);
    }

    #[test]
    fn knn_floor_to_zero() {
        let e = build_knn(&matrix(vec![sv(&[(0, 1.0)]); 3]), 2);
        assert_eq!(e.edge_count(), 0);
    }

    #[test]
    fn knn_on_pure_communities_stays_inside() {
        let spec = SyntheticSpec::planted(80, 2, 1.0, 0.0, 4);
        let ds = generate_synthetic(&spec).unwrap();
        let comm = planted_communities(&spec);
        let e = build_knn(&ds.partitions[1], 80 * 5);
        for (i, j) in e.pairs() {
            assert_eq!(comm[i as usize], comm[j as usize]);
        }
    }

    #[test]
    fn threshold_examples() {
        let rows = vec![sv(&[(0, 1.0)]), sv(&[(0, 1.0), (1, 1.0)]), sv(&[(1, 1.0)]), sv(&[(2, 1.0)])];
        let m = matrix(rows);
        let full = build_threshold(&m, 100);
        assert_eq!(full.edge_count(), 12);
        assert!(!full.directed());
        assert_eq!(build_threshold(&m, 0).edge_count(), 0);
        // best pairs: (0,1) and (1,2) at 1/√2; then zeros
        let two = build_threshold(&m, 2);
        assert_eq!(two.adjacency, vec![vec![1], vec![0, 2], vec![1], vec![]]);
    }

    #[test]
    fn explicit_loading() {
        let dir = tempfile::tempdir().unwrap();
        let ids = IdMap::sequential(4);
        let write = |name: &str, body: &str| {
            let p = dir.path().join(name);
            std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
            p
        };
        let (e, r) = load_explicit(&write("a.tsv", "0\t1\n1\t0\n"), &ids).unwrap();
        assert_eq!(e.edge_count(), 2);
        assert!(e.contains(0, 1) && e.contains(1, 0));
        assert_eq!(r, DropReport::default());

        let (_, r) = load_explicit(&write("b.tsv", "3\t3\n0\t2\n"), &ids).unwrap();
        assert_eq!(r.self_loops, 1);

        let (a, _) = load_explicit(&write("c.tsv", "0\t1\n2\t3\n1\t2\n"), &ids).unwrap();
        let (b, r) = load_explicit(&write("d.tsv", "1\t2\n0\t1\n2\t3\n0\t1\n1\t2\n"), &ids).unwrap();
        assert_eq!(a, b);
        assert_eq!(r.duplicates, 2);

        let err = load_explicit(&write("e.tsv", "0\t9\n"), &ids).unwrap_err();
        assert!(matches!(err, Error::UnknownNode(ref id) if id == "9"));
    }

    #[test]
    fn rewire_zero_is_identity_and_degrees_hold() {
        let spec = SyntheticSpec::planted(100, 2, 0.9, 0.0, 1);
        let ds = generate_synthetic(&spec).unwrap();
        let e = build_knn(&ds.partitions[1], 100 * 6);
        assert_eq!(rewire(&e, 0.0, 9).unwrap(), e);
        for p in [0.25, 0.5, 1.0] {
            let r = rewire(&e, p, 9).unwrap();
            assert_eq!(r.out_degrees(), e.out_degrees());
            assert!(r.pairs().all(|(i, j)| i != j));
            assert_eq!(r, rewire(&e, p, 9).unwrap());
        }
        assert!(rewire(&e, 1.5, 0).is_err());
    }

    #[test]
    fn rewire_complete_node_keeps_edges() {
        let (e, _) = EdgeSet::from_pairs(3, [(0, 1), (0, 2), (1, 2)], true);
        let r = rewire(&e, 1.0, 3).unwrap();
        assert_eq!(r.out_neighbors(0), &[1, 2]);
        assert_eq!(r.out_neighbors(1).len(), 1);
    }

    #[test]
    fn rewire_full_randomizes_community_edges() {
        let spec = SyntheticSpec::planted(1000, 2, 0.95, 0.0, 8);
        let ds = generate_synthetic(&spec).unwrap();
        let comm = planted_communities(&spec);
        let e = build_knn(&ds.partitions[1], 1000 * 5);
        let intra = |g: &EdgeSet| {
            g.pairs().filter(|&(i, j)| comm[i as usize] == comm[j as usize]).count() as f64 / g.edge_count() as f64
        };
        assert!(intra(&e) > 0.9);
        let r = rewire(&e, 1.0, 17).unwrap();
        assert!((intra(&r) - 0.5).abs() <= 0.05, "{}", intra(&r));
    }
}
