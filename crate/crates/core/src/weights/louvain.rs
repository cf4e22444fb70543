//! Louvain modularity optimization (local moving plus aggregation).

use rand::seq::SliceRandom;

use crate::seed::SeedBuilder;

/// Minimum modularity gain for a local-moving pass to count as progress.
pub const MIN_GAIN: f64 = 1e-9;

struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl WeightedGraph {
    fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|e| e.1).sum::<f64>() + 2.0 * self.self_loops[i]
    }

    fn total_weight2(&self) -> f64 {
        (0..self.adj.len()).map(|i| self.degree(i)).sum()
    }
}

/// Modularity of `assignment` on an unweighted undirected graph given as
/// symmetric neighbor lists.
pub fn modularity(neighbors: &[Vec<u32>], assignment: &[u32]) -> f64 {
    let m2: f64 = neighbors.iter().map(|l| l.len() as f64).sum();
    if m2 == 0.0 {
        return 0.0;
    }
    let k = assignment.iter().max().map_or(0, |&c| c as usize + 1);
    let mut tot = vec![0.0; k];
    let mut inside = 0.0;
    for (i, list) in neighbors.iter().enumerate() {
        tot[assignment[i] as usize] += list.len() as f64;
        inside += list.iter().filter(|&&j| assignment[j as usize] == assignment[i]).count() as f64;
    }
    inside / m2 - tot.iter().map(|t| (t / m2) * (t / m2)).sum::<f64>()
}

/// One level of local moving. Returns the community of each node and whether
/// any node moved.
fn local_moving(g: &WeightedGraph, rng: &mut impl rand::Rng) -> (Vec<usize>, bool) {
    let n = g.adj.len();
    let m2 = g.total_weight2();
    let mut community: Vec<usize> = (0..n).collect();
    if m2 == 0.0 {
        return (community, false);
    }
    let degree: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let mut tot = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut weight_to = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut pass_gain = 0.0;
        for &i in &order {
            let ki = degree[i];
            let own = community[i];
            for &(j, w) in &g.adj[i] {
                let c = community[j];
                if weight_to[c] == 0.0 {
                    touched.push(c);
                }
                weight_to[c] += w;
            }
            tot[own] -= ki;
            let stay_gain = weight_to[own] - tot[own] * ki / m2;
            let mut best = own;
            let mut best_gain = stay_gain;
            touched.sort_unstable();
            for &c in &touched {
                let gain = weight_to[c] - tot[c] * ki / m2;
                if gain > best_gain + 1e-12 {
                    best = c;
                    best_gain = gain;
                }
            }
            tot[best] += ki;
            if best != own {
                community[i] = best;
                pass_gain += 2.0 * (best_gain - stay_gain) / m2;
                moved_any = true;
            }
            for &c in &touched {
                weight_to[c] = 0.0;
            }
            touched.clear();
        }
        if pass_gain <= MIN_GAIN {
            break;
        }
    }
    (community, moved_any)
}

fn renumber(assignment: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in assignment.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

fn aggregate(g: &WeightedGraph, community: &[usize], count: usize) -> WeightedGraph {
    let mut adj_map: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
    let mut self_loops = vec![0.0; count];
    for (i, list) in g.adj.iter().enumerate() {
        let ci = community[i];
        self_loops[ci] += g.self_loops[i];
        for &(j, w) in list {
            let cj = community[j];
            if ci == cj {
                // each internal edge is seen from both endpoints
                self_loops[ci] += w / 2.0;
            } else {
                *adj_map[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    WeightedGraph {
        adj: adj_map.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loops,
    }
}

/// Community assignment of each node, ids dense from 0 in order of first
/// appearance by node id. Node visit order is shuffled by `seed`.
pub fn louvain(neighbors: &[Vec<u32>], seed: u64) -> Vec<u32> {
    let n = neighbors.len();
    let mut rng = SeedBuilder::new(seed).with_str("louvain").rng();
    let mut graph = WeightedGraph {
        adj: neighbors
            .iter()
            .map(|l| l.iter().map(|&j| (j as usize, 1.0)).collect())
            .collect(),
        self_loops: vec![0.0; n],
    };
    let mut membership: Vec<usize> = (0..n).collect();
    loop {
        let (mut community, moved) = local_moving(&graph, &mut rng);
        if !moved {
            break;
        }
        let count = renumber(&mut community);
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        graph = aggregate(&graph, &community, count);
    }
    renumber(&mut membership);
    membership.into_iter().map(|c| c as u32).collect()
}
