//! Planted-community synthetic datasets.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttributeMatrix, Dataset, IdMap, LabelSet};
use crate::error::{Error, Result};
use crate::seed::SeedBuilder;
use crate::sparse::SparseVec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub node_count: usize,
    pub community_count: usize,
    /// Probability that one unit of attribute mass falls in the node's own block.
    pub intra_affinity: f64,
    /// Per-node label flip rate.
    pub label_noise: f64,
    pub seed: u64,
    /// Width of each community's signature item block.
    pub items_per_community: usize,
    /// Activity draws per node and partition, sampled uniformly from this range.
    pub min_draws: usize,
    pub max_draws: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            node_count: 600,
            community_count: 6,
            intra_affinity: 0.9,
            label_noise: 0.05,
            seed: 0,
            items_per_community: 20,
            min_draws: 10,
            max_draws: 60,
        }
    }
}

impl SyntheticSpec {
    pub fn planted(node_count: usize, community_count: usize, intra_affinity: f64, label_noise: f64, seed: u64) -> Self {
        SyntheticSpec {
            node_count,
            community_count,
            intra_affinity,
            label_noise,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.community_count == 0 || self.community_count > self.node_count {
            return bad(format!(
                "community_count must be in 1..={}, got {}",
                self.node_count, self.community_count
            ));
        }
        if !(self.intra_affinity > 0.0 && self.intra_affinity <= 1.0) {
            return bad(format!("intra_affinity must be in (0, 1], got {}", self.intra_affinity));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad(format!("label_noise must be in [0, 1), got {}", self.label_noise));
        }
        if self.items_per_community == 0 || self.min_draws == 0 || self.min_draws > self.max_draws {
            return bad("item block width and draw range must be positive and ordered".into());
        }
        Ok(())
    }
}

/// Community of each node under `spec`: a seeded balanced assignment.
pub fn planted_communities(spec: &SyntheticSpec) -> Vec<u32> {
    let mut rng = SeedBuilder::new(spec.seed).with_str("communities").rng();
    let mut order: Vec<usize> = (0..spec.node_count).collect();
    order.shuffle(&mut rng);
    let mut community = vec![0u32; spec.node_count];
    for (slot, node) in order.into_iter().enumerate() {
        community[node] = (slot % spec.community_count) as u32;
    }
    community
}

/// Generates three partitions over a planted community structure. Each
/// community owns a disjoint block of items; a node's activity falls in its
/// own block with probability `intra_affinity` and uniformly over the other
/// blocks otherwise. One label set per community, flipped at `label_noise`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let community = planted_communities(spec);
    let block = spec.items_per_community;
    let item_count = block * spec.community_count;

    let partitions = [0u64, 1, 2].map(|p| {
        let mut rng = SeedBuilder::new(spec.seed).with_str("attributes").with_u64(p).rng();
        let rows = community
            .iter()
            .map(|&c| {
                let draws = rng.random_range(spec.min_draws..=spec.max_draws);
                let own = c as usize * block;
                let mut pairs = Vec::with_capacity(draws);
                for _ in 0..draws {
                    let inside = spec.community_count == 1 || rng.random_bool(spec.intra_affinity);
                    let item = if inside {
                        own + rng.random_range(0..block)
                    } else {
                        // uniform over items outside the own block
                        let j = rng.random_range(0..item_count - block);
                        if j >= own {
                            j + block
                        } else {
                            j
                        }
                    };
                    pairs.push((item as u32, 1.0));
                }
                SparseVec::from_pairs(pairs)
            })
            .collect();
        AttributeMatrix { rows, item_count }
    });

    let label_sets = [0u64, 1, 2].map(|p| {
        let mut rng = SeedBuilder::new(spec.seed).with_str("labels").with_u64(p).rng();
        let mut sets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); spec.community_count];
        for (node, &c) in community.iter().enumerate() {
            for (label, set) in sets.iter_mut().enumerate() {
                let member = label as u32 == c;
                let flip = spec.label_noise > 0.0 && rng.random_bool(spec.label_noise);
                if member != flip {
                    set.insert(node as u32);
                }
            }
        }
        sets.into_iter()
            .enumerate()
            .map(|(c, positives)| LabelSet {
                name: format!("community_{c}"),
                positives,
            })
            .collect::<Vec<_>>()
    });

    let ds = Dataset {
        node_count: spec.node_count,
        partitions,
        label_sets,
        explicit_edges: None,
        node_ids: IdMap::sequential(spec.node_count),
    };
    ds.validate()?;
    Ok(ds)
}
