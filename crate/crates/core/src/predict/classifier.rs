//! Random forest and linear (hinge loss) binary classifiers over sparse rows.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdl::{Canon, Canonical};
use crate::seed::rng_from;
use crate::sparse::SparseVec;

/// Most features a classifier sees; ranked by document frequency.
pub const DEFAULT_MAX_FEATURES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[default]
    Forest,
    Linear,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means ⌈√d⌉.
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 10,
            max_depth: 8,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            l2: 1e-4,
            epochs: 50,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorParams {
    pub kind: ClassifierKind,
    pub max_features: usize,
    pub forest: ForestParams,
    pub linear: LinearParams,
}

impl Default for PredictorParams {
    fn default() -> Self {
        PredictorParams {
            kind: ClassifierKind::Forest,
            max_features: DEFAULT_MAX_FEATURES,
            forest: ForestParams::default(),
            linear: LinearParams::default(),
        }
    }
}

impl PredictorParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::InvalidParameter("max_features must be positive".into()));
        }
        if self.forest.trees == 0 || self.forest.features_per_split == Some(0) {
            return Err(Error::InvalidParameter("forest needs at least one tree and one feature per split".into()));
        }
        let l = &self.linear;
        if !(l.l2 >= 0.0 && l.learning_rate > 0.0 && l.l2.is_finite() && l.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("linear l2 must be >= 0 and learning rate > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { neg: u32, pos: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> (u32, u32) {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { neg, pos } => return (*neg, *pos),
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    fn vote(&self, x: &[f64]) -> bool {
        let (neg, pos) = self.leaf(x);
        pos > neg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Constant { label: bool },
    Forest { trees: Vec<Tree>, weights: Vec<f64> },
    Linear { weights: Vec<f64>, bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// Item ids used as features, sorted; model feature indices point here.
    pub feature_map: Vec<u32>,
    pub model: Model,
}

impl Classifier {
    pub fn constant(label: bool) -> Self {
        Classifier {
            feature_map: Vec::new(),
            model: Model::Constant { label },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.model, Model::Constant { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self.model {
            Model::Constant { .. } => "constant",
            Model::Forest { .. } => "forest",
            Model::Linear { .. } => "linear",
        }
    }

    pub fn predict(&self, row: &SparseVec) -> bool {
        match &self.model {
            Model::Constant { label } => *label,
            Model::Forest { trees, weights } => {
                let x = densify(row, &self.feature_map);
                let (mut yes, mut no) = (0.0, 0.0);
                for (t, w) in trees.iter().zip(weights) {
                    if t.vote(&x) {
                        yes += w;
                    } else {
                        no += w;
                    }
                }
                yes > no
            }
            Model::Linear { weights, bias } => {
                let x = normalized(densify(row, &self.feature_map));
                x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + bias > 0.0
            }
        }
    }

    /// Structural invariants: child indices in range, non-negative tree
    /// weights, sorted unique feature map.
    pub fn validate(&self) -> Result<()> {
        if self.feature_map.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("feature map must be sorted and unique".into()));
        }
        let d = self.feature_map.len() as u32;
        match &self.model {
            Model::Constant { .. } => {}
            Model::Forest { trees, weights } => {
                if trees.len() != weights.len() || weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidParameter("forest weights must be non-negative, one per tree".into()));
                }
                for t in trees {
                    let n = t.nodes.len() as u32;
                    for node in &t.nodes {
                        if let TreeNode::Split { feature, left, right, .. } = node {
                            if *feature >= d || *left >= n || *right >= n {
                                return Err(Error::InvalidParameter("tree index out of bounds".into()));
                            }
                        }
                    }
                }
            }
            Model::Linear { weights, .. } => {
                if weights.len() != self.feature_map.len() {
                    return Err(Error::InvalidParameter("linear weight count differs from feature map".into()));
                }
            }
        }
        Ok(())
    }
}

impl Canonical for Classifier {
    /// Split nodes are `[feature, threshold, left, right]`, leaves `[neg, pos]`.
    fn canon(&self) -> Canon {
        match &self.model {
            Model::Constant { label } => Canon::object([("kind", Canon::str("constant")), ("label", Canon::Bool(*label))]),
            Model::Forest { trees, weights } => {
                let trees = trees
                    .iter()
                    .map(|t| {
                        Canon::Array(
                            t.nodes
                                .iter()
                                .map(|n| match n {
                                    TreeNode::Split { feature, threshold, left, right } => Canon::Array(vec![
                                        Canon::Int(*feature as i64),
                                        Canon::Real(*threshold),
                                        Canon::Int(*left as i64),
                                        Canon::Int(*right as i64),
                                    ]),
                                    TreeNode::Leaf { neg, pos } => Canon::ints(&[*neg, *pos]),
                                })
                                .collect(),
                        )
                    })
                    .collect();
                Canon::object([
                    ("features", Canon::ints(&self.feature_map)),
                    ("kind", Canon::str("forest")),
                    ("trees", Canon::Array(trees)),
                    ("weights", Canon::reals(weights)),
                ])
            }
            Model::Linear { weights, bias } => Canon::object([
                ("bias", Canon::Real(*bias)),
                ("features", Canon::ints(&self.feature_map)),
                ("kind", Canon::str("linear")),
                ("weights", Canon::reals(weights)),
            ]),
        }
    }
}

/// Up to `max` items ranked by how many rows contain them (ties by id), sorted by id.
pub fn select_features(rows: &[&SparseVec], max: usize) -> Vec<u32> {
    let mut items: Vec<u32> = rows.iter().flat_map(|r| r.entries().iter().map(|e| e.0)).collect();
    items.sort_unstable();
    let mut counts: Vec<(usize, u32)> = Vec::new();
    for chunk in items.chunk_by(|a, b| a == b) {
        counts.push((chunk.len(), chunk[0]));
    }
    counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    counts.truncate(max);
    let mut out: Vec<u32> = counts.into_iter().map(|c| c.1).collect();
    out.sort_unstable();
    out
}

/// Values of `row` at the positions of `feature_map` (both sorted).
pub fn densify(row: &SparseVec, feature_map: &[u32]) -> Vec<f64> {
    let mut x = vec![0.0; feature_map.len()];
    let mut j = 0;
    for &(item, v) in row.entries() {
        while j < feature_map.len() && feature_map[j] < item {
            j += 1;
        }
        if j == feature_map.len() {
            break;
        }
        if feature_map[j] == item {
            x[j] = v;
        }
    }
    x
}

fn normalized(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    x
}

/// Trains a binary classifier. A single-class training set yields a
/// constant classifier.
pub fn train_classifier(rows: &[&SparseVec], labels: &[bool], params: &PredictorParams, seed: u64) -> Result<Classifier> {
    if rows.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    if rows.len() != labels.len() {
        return Err(Error::InvalidParameter("row and label counts differ".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Ok(Classifier::constant(positives > 0));
    }
    let feature_map = select_features(rows, params.max_features);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| densify(r, &feature_map)).collect();
    let mut rng = rng_from(seed);
    let c = match params.kind {
        ClassifierKind::Forest => train_forest(&x, labels, feature_map, &params.forest, &mut rng),
        ClassifierKind::Linear => train_linear(x, labels, feature_map, &params.linear, &mut rng),
    };
    Ok(c)
}

fn train_forest(x: &[Vec<f64>], y: &[bool], feature_map: Vec<u32>, p: &ForestParams, rng: &mut ChaCha8Rng) -> Classifier {
    let n = x.len();
    let d = feature_map.len();
    let mtry = p
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let mut trees = Vec::with_capacity(p.trees);
    for _ in 0..p.trees {
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        trees.push(grow_tree(x, y, sample, d, mtry, p.max_depth, rng));
    }
    // keep only features some split uses
    let mut used: Vec<u32> = trees
        .iter()
        .flat_map(|t| t.nodes.iter())
        .filter_map(|n| match n {
            TreeNode::Split { feature, .. } => Some(*feature),
            _ => None,
        })
        .collect();
    used.sort_unstable();
    used.dedup();
    let mut remap = vec![u32::MAX; d];
    for (new, &old) in used.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    for t in &mut trees {
        for node in &mut t.nodes {
            if let TreeNode::Split { feature, .. } = node {
                *feature = remap[*feature as usize];
            }
        }
    }
    Classifier {
        feature_map: used.iter().map(|&f| feature_map[f as usize]).collect(),
        model: Model::Forest {
            weights: vec![1.0; trees.len()],
            trees,
        },
    }
}

fn gini_cost(neg: usize, pos: usize) -> f64 {
    let n = (neg + pos) as f64;
    if n == 0.0 {
        return 0.0;
    }
    // n · gini = n − (neg² + pos²)/n
    n - (neg * neg + pos * pos) as f64 / n
}

fn grow_tree(
    x: &[Vec<f64>],
    y: &[bool],
    sample: Vec<usize>,
    d: usize,
    mtry: usize,
    max_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let features: Vec<u32> = (0..d as u32).collect();
    // (slot, rows, depth)
    let mut stack = vec![(0usize, sample, 0usize)];
    nodes.push(TreeNode::Leaf { neg: 0, pos: 0 });
    let mut column: Vec<(f64, bool)> = Vec::new();
    while let Some((slot, rows, depth)) = stack.pop() {
        let pos = rows.iter().filter(|&&r| y[r]).count();
        let neg = rows.len() - pos;
        let leaf = TreeNode::Leaf { neg: neg as u32, pos: pos as u32 };
        if depth >= max_depth || pos == 0 || neg == 0 || d == 0 {
            nodes[slot] = leaf;
            continue;
        }
        let parent = gini_cost(neg, pos);
        let mut best: Option<(f64, u32, f64)> = None;
        for &f in features.choose_multiple(rng, mtry) {
            column.clear();
            column.extend(rows.iter().map(|&r| (x[r][f as usize], y[r])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut lneg, mut lpos) = (0usize, 0usize);
            for i in 0..column.len() - 1 {
                if column[i].1 {
                    lpos += 1;
                } else {
                    lneg += 1;
                }
                if column[i].0 == column[i + 1].0 {
                    continue;
                }
                let c = gini_cost(lneg, lpos) + gini_cost(neg - lneg, pos - lpos);
                if c < parent - 1e-12 && best.is_none_or(|b| c < b.0) {
                    best = Some((c, f, (column[i].0 + column[i + 1].0) / 2.0));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            nodes[slot] = leaf;
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[row][feature as usize] <= threshold);
        let left = nodes.len() as u32;
        nodes.push(TreeNode::Leaf { neg: 0, pos: 0 });
        nodes.push(TreeNode::Leaf { neg: 0, pos: 0 });
        nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right: left + 1,
        };
        stack.push((left as usize + 1, r, depth + 1));
        stack.push((left as usize, l, depth + 1));
    }
    Tree { nodes }
}

fn train_linear(x: Vec<Vec<f64>>, y: &[bool], feature_map: Vec<u32>, p: &LinearParams, rng: &mut ChaCha8Rng) -> Classifier {
    let x: Vec<Vec<f64>> = x.into_iter().map(normalized).collect();
    let d = feature_map.len();
    let mut w = vec![0.0; d];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    for _ in 0..p.epochs {
        order.shuffle(rng);
        for &i in &order {
            let target = if y[i] { 1.0 } else { -1.0 };
            let margin = target * (x[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + bias);
            let shrink = 1.0 - p.learning_rate * p.l2;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += p.learning_rate * target * xj;
                }
                bias += p.learning_rate * target;
            }
        }
    }
    Classifier {
        feature_map,
        model: Model::Linear { weights: w, bias },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdl::{cost, serialize_canonical, Codec};
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn sv(pairs: &[(u32, f64)]) -> SparseVec {
        SparseVec::from_pairs(pairs.to_vec())
    }

    fn separable() -> (Vec<SparseVec>, Vec<bool>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            rows.push(sv(&[(3, 2.0 + t), (8, 0.5 * t)]));
            labels.push(true);
            rows.push(sv(&[(3, 0.5 * t), (8, 2.0 + t)]));
            labels.push(false);
        }
        (rows, labels)
    }

    fn params(kind: ClassifierKind) -> PredictorParams {
        PredictorParams { kind, ..Default::default() }
    }

    #[test]
    fn separable_training_accuracy() {
        let (rows, labels) = separable();
        let refs: Vec<&SparseVec> = rows.iter().collect();
        for kind in [ClassifierKind::Forest, ClassifierKind::Linear] {
            let c = train_classifier(&refs, &labels, &params(kind), 7).unwrap();
            c.validate().unwrap();
            let acc = rows.iter().zip(&labels).filter(|(r, &l)| c.predict(r) == l).count();
            assert_eq!(acc, rows.len(), "{kind:?}");
        }
    }

    #[test]
    fn single_class_is_constant() {
        let (rows, _) = separable();
        let refs: Vec<&SparseVec> = rows.iter().collect();
        let c = train_classifier(&refs, &vec![true; rows.len()], &params(ClassifierKind::Forest), 0).unwrap();
        assert_eq!(c, Classifier::constant(true));
        assert!(c.predict(&sv(&[])));
        assert!(train_classifier(&[], &[], &params(ClassifierKind::Linear), 0).is_err());
    }

    #[test]
    fn deterministic_and_round_trips() {
        let (rows, labels) = separable();
        let refs: Vec<&SparseVec> = rows.iter().collect();
        for kind in [ClassifierKind::Forest, ClassifierKind::Linear] {
            let a = serialize_canonical(&train_classifier(&refs, &labels, &params(kind), 3).unwrap()).unwrap();
            let b = serialize_canonical(&train_classifier(&refs, &labels, &params(kind), 3).unwrap()).unwrap();
            assert_eq!(a, b);
            assert_eq!(Canon::parse(&a).unwrap().to_bytes().unwrap(), a);
        }
    }

    #[test]
    fn forest_feature_map_compacted() {
        let (mut rows, labels) = separable();
        // an item present everywhere but useless for the split
        for r in &mut rows {
            let mut e = r.entries().to_vec();
            e.push((100, 1.0));
            *r = SparseVec::from_pairs(e);
        }
        let refs: Vec<&SparseVec> = rows.iter().collect();
        let c = train_classifier(&refs, &labels, &params(ClassifierKind::Forest), 1).unwrap();
        assert!(!c.feature_map.contains(&100));
        assert!(cost(&c, Codec::Lz4).unwrap() > 0);
    }

    #[test]
    fn tree_order_does_not_matter() {
        let (rows, labels) = separable();
        let refs: Vec<&SparseVec> = rows.iter().collect();
        let c = train_classifier(&refs, &labels, &params(ClassifierKind::Forest), 5).unwrap();
        let Model::Forest { trees, weights } = &c.model else { panic!() };
        let mut rev = trees.clone();
        rev.reverse();
        let r = Classifier {
            feature_map: c.feature_map.clone(),
            model: Model::Forest { trees: rev, weights: weights.clone() },
        };
        for x in 0..30 {
            let probe = sv(&[(3, x as f64 / 10.0), (8, (30 - x) as f64 / 10.0)]);
            assert_eq!(c.predict(&probe), r.predict(&probe));
        }
    }

    #[test]
    fn feature_selection_by_frequency() {
        let rows = [sv(&[(1, 1.0), (2, 1.0)]), sv(&[(2, 1.0), (5, 1.0)]), sv(&[(5, 3.0), (2, 1.0)])];
        let refs: Vec<&SparseVec> = rows.iter().collect();
        assert_eq!(select_features(&refs, 2), vec![2, 5]);
        assert_eq!(select_features(&refs, 10), vec![1, 2, 5]);
        assert_eq!(densify(&rows[2], &[2, 3, 5]), vec![1.0, 0.0, 3.0]);
    }

    proptest! {
        #[test]
        fn trained_forests_are_valid(seed in 0u64..1000, n in 2usize..40) {
            let mut rng = rng_from(seed);
            let rows: Vec<SparseVec> = (0..n)
                .map(|_| SparseVec::from_pairs((0..5).map(|_| (rng.random_range(0..12), rng.random_range(0.0..3.0))).collect()))
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let refs: Vec<&SparseVec> = rows.iter().collect();
            for kind in [ClassifierKind::Forest, ClassifierKind::Linear] {
                let c = train_classifier(&refs, &labels, &params(kind), seed).unwrap();
                prop_assert!(c.validate().is_ok());
                let bytes = serialize_canonical(&c).unwrap();
                prop_assert_eq!(Canon::parse(&bytes).unwrap().to_bytes().unwrap(), bytes);
            }
        }
    }
}
