//! Activity-log ingestion, temporal partitioning, attribute matrices and
//! listener-rule label sets.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::EdgeSet;
use crate::sparse::SparseVec;

pub use io::{load_events, load_item_groups, write_id_map, ColumnFormat};
pub use synth::{generate_synthetic, planted_communities, SyntheticSpec};

/// One `(node, item, value, timestamp)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub node: u32,
    pub item: u32,
    pub value: f64,
    pub timestamp: i64,
}

/// Dense 0-based ids assigned in first-appearance order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IdMap {
    originals: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity mapping `"0".."n-1"`.
    pub fn sequential(n: usize) -> Self {
        let mut map = IdMap::new();
        for i in 0..n {
            map.intern(&i.to_string());
        }
        map
    }

    pub fn intern(&mut self, original: &str) -> u32 {
        if self.index.is_empty() && !self.originals.is_empty() {
            self.rebuild_index();
        }
        if let Some(&id) = self.index.get(original) {
            return id;
        }
        let id = self.originals.len() as u32;
        self.originals.push(original.to_owned());
        self.index.insert(original.to_owned(), id);
        id
    }

    pub fn lookup(&self, original: &str) -> Option<u32> {
        if self.index.is_empty() && !self.originals.is_empty() {
            // deserialized maps carry no index
            return self
                .originals
                .iter()
                .position(|o| o == original)
                .map(|p| p as u32);
        }
        self.index.get(original).copied()
    }

    pub fn original(&self, dense: u32) -> Option<&str> {
        self.originals.get(dense as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .originals
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), i as u32))
            .collect();
    }
}

impl PartialEq for IdMap {
    fn eq(&self, other: &Self) -> bool {
        self.originals == other.originals
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub nodes: IdMap,
    pub items: IdMap,
}

impl EventLog {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn with_events(&self, events: Vec<Event>) -> EventLog {
        EventLog {
            events,
            nodes: self.nodes.clone(),
            items: self.items.clone(),
        }
    }
}

/// Per-node sparse attribute rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatrix {
    pub rows: Vec<SparseVec>,
    pub item_count: usize,
}

impl AttributeMatrix {
    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, node: u32) -> &SparseVec {
        &self.rows[node as usize]
    }

    /// Number of non-zero attributes per node.
    pub fn nnz_counts(&self) -> Vec<usize> {
        self.rows.iter().map(SparseVec::nnz).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub name: String,
    pub positives: BTreeSet<u32>,
}

impl LabelSet {
    pub fn mask(&self, node_count: usize) -> Vec<bool> {
        let mut m = vec![false; node_count];
        for &p in &self.positives {
            m[p as usize] = true;
        }
        m
    }
}

/// Item groups (genres, tags, categories) keyed by name, items as dense ids.
pub type ItemGroups = BTreeMap<String, BTreeSet<u32>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Validation,
    Training,
    Testing,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Validation, Partition::Training, Partition::Testing];

    pub fn index(self) -> usize {
        match self {
            Partition::Validation => 0,
            Partition::Training => 1,
            Partition::Testing => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Validation => "validation",
            Partition::Training => "training",
            Partition::Testing => "testing",
        }
    }
}

/// Three temporally ordered partitions over one node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub node_count: usize,
    pub partitions: [AttributeMatrix; 3],
    pub label_sets: [Vec<LabelSet>; 3],
    pub explicit_edges: Option<EdgeSet>,
    pub node_ids: IdMap,
}

impl Dataset {
    pub fn attributes(&self, p: Partition) -> &AttributeMatrix {
        &self.partitions[p.index()]
    }

    pub fn labels(&self, p: Partition) -> &[LabelSet] {
        &self.label_sets[p.index()]
    }

    pub fn label_names(&self) -> Vec<String> {
        self.label_sets[0].iter().map(|l| l.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (p, m) in self.partitions.iter().enumerate() {
            if m.node_count() != self.node_count {
                return Err(Error::InvalidParameter(format!(
                    "partition {p} has {} rows, expected {}",
                    m.node_count(),
                    self.node_count
                )));
            }
        }
        for sets in &self.label_sets {
            for ls in sets {
                if ls.positives.iter().any(|&n| n as usize >= self.node_count) {
                    return Err(Error::InvalidParameter(format!(
                        "label set {} references a node outside the node set",
                        ls.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds all three partitions from a raw log.
    pub fn from_event_log(
        log: &EventLog,
        fractions: [f64; 3],
        groups: &ItemGroups,
        thresholds: LabelThresholds,
        explicit_edges: Option<EdgeSet>,
    ) -> Result<Dataset> {
        let parts = temporal_split(log, fractions)?;
        let partitions = parts.clone().map(|p| build_attributes(&p));
        let label_sets = [0, 1, 2].map(|i| labels_from_attributes(&partitions[i], groups, thresholds));
        let ds = Dataset {
            node_count: log.node_count(),
            partitions,
            label_sets,
            explicit_edges,
            node_ids: log.nodes.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }
}

/// Splits a log into validation, training and testing intervals whose time
/// spans follow `fractions`.
///
/// Timestamps are whole seconds, so the covered extent is
/// `[t_min, t_max + 1)`. An event at `t` goes to the first interval whose
/// upper bound exceeds `t`.
pub fn temporal_split(log: &EventLog, fractions: [f64; 3]) -> Result<[EventLog; 3]> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "split fractions must be non-negative, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    if log.is_empty() {
        return Err(Error::Empty("event log"));
    }
    let t_min = log.events.iter().map(|e| e.timestamp).min().unwrap();
    let t_max = log.events.iter().map(|e| e.timestamp).max().unwrap();
    if t_min == t_max && log.events.len() > 1 {
        return Err(Error::NoTemporalExtent(log.events.len()));
    }
    let extent = (t_max - t_min + 1) as f64;
    let first = t_min as f64 + fractions[0] * extent;
    let second = t_min as f64 + (fractions[0] + fractions[1]) * extent;

    let mut buckets: [Vec<Event>; 3] = Default::default();
    for e in &log.events {
        let t = e.timestamp as f64;
        let b = if t < first {
            0
        } else if t < second {
            1
        } else {
            2
        };
        buckets[b].push(*e);
    }
    Ok(buckets.map(|events| log.with_events(events)))
}

/// Sums event values per `(node, item)`.
///
/// Values are summed in sorted order, so the result does not depend on the
/// order of events in the log.
pub fn build_attributes(log: &EventLog) -> AttributeMatrix {
    let mut per_node: Vec<Vec<(u32, f64)>> = vec![Vec::new(); log.node_count()];
    for e in &log.events {
        per_node[e.node as usize].push((e.item, e.value));
    }
    AttributeMatrix {
        rows: per_node.into_iter().map(SparseVec::from_pairs).collect(),
        item_count: log.item_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    /// Minimum total value for an item to count (e.g. 5 plays of an artist).
    pub value: f64,
    /// Minimum number of qualifying items in the group (e.g. 5 artists).
    pub items: usize,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds { value: 5.0, items: 5 }
    }
}

/// Listener rule over a raw log: node `i` is positive for group `g` iff at
/// least `items` members of `g` have total value `>= value` for `i`.
pub fn build_labels(log: &EventLog, groups: &ItemGroups, thresholds: LabelThresholds) -> Vec<LabelSet> {
    labels_from_attributes(&build_attributes(log), groups, thresholds)
}

pub fn labels_from_attributes(
    attrs: &AttributeMatrix,
    groups: &ItemGroups,
    thresholds: LabelThresholds,
) -> Vec<LabelSet> {
    groups
        .iter()
        .map(|(name, members)| {
            let positives = attrs
                .rows
                .iter()
                .enumerate()
                .filter(|(_, row)| {
                    row.entries()
                        .iter()
                        .filter(|(item, v)| *v >= thresholds.value && members.contains(item))
                        .count()
                        >= thresholds.items
                })
                .map(|(i, _)| i as u32)
                .collect();
            LabelSet {
                name: name.clone(),
                positives,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn log_from(events: &[(u32, u32, f64, i64)]) -> EventLog {
        let n = events.iter().map(|e| e.0).max().map_or(0, |m| m + 1) as usize;
        let m = events.iter().map(|e| e.1).max().map_or(0, |m| m + 1) as usize;
        EventLog {
            events: events
                .iter()
                .map(|&(node, item, value, timestamp)| Event {
                    node,
                    item,
                    value,
                    timestamp,
                })
                .collect(),
            nodes: IdMap::sequential(n),
            items: IdMap::sequential(m),
        }
    }

    #[test]
    fn split_by_span_terciles() {
        let events: Vec<_> = (0..100).map(|t| (0, 0, 1.0, t)).collect();
        let log = log_from(&events);
        let third = 1.0 / 3.0;
        let parts = temporal_split(&log, [third, third, third]).unwrap();
        // bounds at 33.33 and 66.67 over the extent [0, 100)
        let count = |p: &EventLog| p.events.len();
        assert_eq!(count(&parts[0]), 34);
        assert_eq!(count(&parts[1]), 33);
        assert_eq!(count(&parts[2]), 33);
        assert!(parts[0].events.iter().all(|e| e.timestamp <= 33));
        assert!(parts[2].events.iter().all(|e| e.timestamp >= 67));
    }

    #[test]
    fn split_single_event_lands_once() {
        let log = log_from(&[(0, 0, 1.0, 42)]);
        let parts = temporal_split(&log, [0.3, 0.3, 0.4]).unwrap();
        let sizes: Vec<_> = parts.iter().map(|p| p.events.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 1);
        assert_eq!(sizes.iter().filter(|&&s| s == 0).count(), 2);
    }

    #[test]
    fn split_degenerate_fractions() {
        let events: Vec<_> = (0..10).map(|t| (0, 0, 1.0, t * 7)).collect();
        let parts = temporal_split(&log_from(&events), [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(parts[0].events.len(), 10);
    }

    #[test]
    fn split_errors() {
        let same = log_from(&[(0, 0, 1.0, 5), (1, 0, 1.0, 5)]);
        assert!(matches!(
            temporal_split(&same, [0.5, 0.25, 0.25]),
            Err(Error::NoTemporalExtent(2))
        ));
        assert!(temporal_split(&EventLog::default(), [0.5, 0.25, 0.25]).is_err());
        assert!(temporal_split(&same, [0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn attributes_sum_duplicates() {
        let log = log_from(&[(0, 5, 1.0, 0), (0, 5, 2.0, 1), (3, 1, 1.0, 2)]);
        let a = build_attributes(&log);
        assert_eq!(a.rows[0].entries(), &[(5, 3.0)]);
        assert!(a.rows[1].is_empty());
        assert!(a.rows[2].is_empty());
        assert_eq!(a.node_count(), 4);
    }

    #[test]
    fn attributes_match_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let events: Vec<_> = (0..100)
            .map(|t| (rng.random_range(0..8u32), rng.random_range(0..6u32), rng.random_range(0..5) as f64, t))
            .collect();
        let log = log_from(&events);
        let mut dense = vec![vec![0.0; log.item_count()]; log.node_count()];
        for &(n, i, v, _) in &events {
            dense[n as usize][i as usize] += v;
        }
        let a = build_attributes(&log);
        for (n, row) in dense.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                assert_eq!(a.rows[n].get(i as u32), v);
            }
            assert!(a.rows[n].entries().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    fn groups(items: &[(&str, &[u32])]) -> ItemGroups {
        items
            .iter()
            .map(|(g, m)| (g.to_string(), m.iter().copied().collect()))
            .collect()
    }

    #[test]
    fn listener_rule_thresholds() {
        // node 0: five group items at value 5; node 1: only four
        let mut ev = Vec::new();
        for item in 0..5 {
            ev.push((0, item, 5.0, 0));
        }
        for item in 0..4 {
            ev.push((1, item, 9.0, 0));
        }
        ev.push((1, 4, 4.0, 0));
        let log = log_from(&ev);
        let g = groups(&[("rock", &[0, 1, 2, 3, 4]), ("empty", &[])]);
        let labels = build_labels(&log, &g, LabelThresholds::default());
        let rock = labels.iter().find(|l| l.name == "rock").unwrap();
        assert_eq!(rock.positives, BTreeSet::from([0]));
        let empty = labels.iter().find(|l| l.name == "empty").unwrap();
        assert!(empty.positives.is_empty());
    }

    #[test]
    fn listener_rule_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let events: Vec<_> = (0..400)
            .map(|t| (rng.random_range(0..20u32), rng.random_range(0..10u32), 1.0, t))
            .collect();
        let log = log_from(&events);
        let g = groups(&[("a", &[0, 1, 2, 3]), ("b", &[4, 5, 6, 7, 8, 9])]);
        let th = LabelThresholds { value: 2.0, items: 2 };
        let labels = build_labels(&log, &g, th);
        for ls in &labels {
            let members = &g[&ls.name];
            for node in 0..log.node_count() as u32 {
                let qualifying = members
                    .iter()
                    .filter(|&&item| {
                        events
                            .iter()
                            .filter(|e| e.0 == node && e.1 == item)
                            .map(|e| e.2)
                            .sum::<f64>()
                            >= 2.0
                    })
                    .count();
                assert_eq!(ls.positives.contains(&node), qualifying >= 2, "node {node} group {}", ls.name);
            }
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(ts in proptest::collection::vec(0i64..1000, 2..60), a in 0.05f64..0.9) {
            let events: Vec<_> = ts.iter().enumerate().map(|(i, &t)| ((i % 3) as u32, 0u32, 1.0, t)).collect();
            let log = log_from(&events);
            let b = (1.0 - a) / 2.0;
            match temporal_split(&log, [a, b, 1.0 - a - b]) {
                Ok(parts) => {
                    let mut all: Vec<_> = parts.iter().flat_map(|p| p.events.iter().map(|e| (e.node, e.timestamp))).collect();
                    let mut orig: Vec<_> = log.events.iter().map(|e| (e.node, e.timestamp)).collect();
                    all.sort();
                    orig.sort();
                    prop_assert_eq!(all, orig);
                    // contiguity: max of earlier partition < min of later
                    for w in 0..2 {
                        if let (Some(hi), Some(lo)) = (
                            parts[w].events.iter().map(|e| e.timestamp).max(),
                            parts[w + 1..].iter().flat_map(|p| p.events.iter().map(|e| e.timestamp)).min(),
                        ) {
                            prop_assert!(hi < lo);
                        }
                    }
                }
                Err(Error::NoTemporalExtent(_)) => prop_assert!(ts.iter().all(|&t| t == ts[0])),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn attributes_permutation_invariant(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut events: Vec<_> = (0..60)
                .map(|t| (rng.random_range(0..5u32), rng.random_range(0..5u32), rng.random_range(0.0..3.0), t))
                .collect();
            let a = build_attributes(&log_from(&events));
            use rand::seq::SliceRandom;
            events.shuffle(&mut rng);
            let b = build_attributes(&log_from(&events));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn labels_monotone_in_thresholds(seed in 0u64..500, v in 1.0f64..4.0, k in 1usize..4) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let events: Vec<_> = (0..200)
                .map(|t| (rng.random_range(0..10u32), rng.random_range(0..8u32), 1.0, t))
                .collect();
            let log = log_from(&events);
            let g = groups(&[("g", &[0, 1, 2, 3, 4, 5])]);
            let base = &build_labels(&log, &g, LabelThresholds { value: v, items: k })[0].positives;
            let stricter_v = &build_labels(&log, &g, LabelThresholds { value: v + 1.0, items: k })[0].positives;
            let stricter_k = &build_labels(&log, &g, LabelThresholds { value: v, items: k + 1 })[0].positives;
            prop_assert!(stricter_v.is_subset(base));
            prop_assert!(stricter_k.is_subset(base));
        }
    }
}
