//! Sparse attribute vectors.

use serde::{Deserialize, Serialize};

/// A sparse real vector with strictly increasing indices and a cached L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct SparseVec {
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl SparseVec {
    /// Builds a vector from `(index, value)` pairs in any order. Duplicate
    /// indices are summed; explicit zeros are dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (idx, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == idx => last.1 += v,
                _ => entries.push((idx, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Self::from_sorted(entries)
    }

    /// Builds from entries already sorted by strictly increasing index.
    ///
    /// # Panics
    /// If indices are not strictly increasing.
    pub fn from_sorted(entries: Vec<(u32, f64)>) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0].0 < w[1].0),
            "sparse indices must be strictly increasing"
        );
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        SparseVec { entries, norm }
    }

    pub fn empty() -> Self {
        SparseVec::default()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

impl From<Vec<(u32, f64)>> for SparseVec {
    fn from(entries: Vec<(u32, f64)>) -> Self {
        SparseVec::from_sorted(entries)
    }
}

impl From<SparseVec> for Vec<(u32, f64)> {
    fn from(v: SparseVec) -> Self {
        v.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_sums_duplicates_and_sorts() {
        let v = SparseVec::from_pairs(vec![(5, 1.0), (2, 3.0), (5, 2.0)]);
        assert_eq!(v.entries(), &[(2, 3.0), (5, 3.0)]);
        assert_eq!(v.get(5), 3.0);
        assert_eq!(v.get(4), 0.0);
    }

    #[test]
    #[should_panic]
    fn unsorted_entries_rejected() {
        let _ = SparseVec::from_sorted(vec![(3, 1.0), (1, 1.0)]);
    }
}
