//! Per-node task predictors: collective classification (CC) and link
//! prediction (LP), replicated with independent seeds.
//!
//! Every `(node, k, replicate)` job draws its own seed from the job
//! coordinates, so results are identical for any worker count and any
//! subset of evaluated nodes.

mod classifier;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeMatrix, LabelSet};
use crate::error::{Error, Result};
use crate::mdl::{self, node_efficiency, Codec, NodeEfficiency};
use crate::network::EdgeSet;
use crate::seed::{derive, job_seed, rng_from};
use crate::sparse::SparseVec;
use crate::stats;
use crate::weights::{NodeWeightModel, ReachSet};

pub use classifier::{
    densify, select_features, train_classifier, Classifier, ClassifierKind, ForestParams, LinearParams, Model,
    PredictorParams, Tree, TreeNode, DEFAULT_MAX_FEATURES,
};

/// Label used for link-prediction jobs in seeds and reports.
pub const LP_LABEL: &str = "edges";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairFeature {
    #[default]
    Absolute,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub k_grid: Vec<usize>,
    pub replicates: u32,
    pub predictor: PredictorParams,
    pub codec: Codec,
    pub pair_feature: PairFeature,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            k_grid: mdl::DEFAULT_K_GRID.to_vec(),
            replicates: 20,
            predictor: PredictorParams::default(),
            codec: Codec::Lz4,
            pair_feature: PairFeature::Absolute,
            seed: 0,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::InvalidParameter("k grid must be non-empty with positive entries".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("need at least one bootstrap replicate".into()));
        }
        self.predictor.validate()
    }
}

/// One trained predictor's evaluation: `correct` of `total` predictions and
/// the compressed size of the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobResult {
    pub node: u32,
    pub k: usize,
    pub replicate: u32,
    pub correct: u32,
    pub total: u32,
    pub cost: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    EmptySubset,
    FewEgonetEdges,
    NoEvaluationPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub node: u32,
    pub k: usize,
    pub replicate: u32,
    pub reason: SkipReason,
}

/// All jobs of one (model, label set) pair, in (node, k, replicate) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRun {
    pub model_id: String,
    pub label: String,
    pub results: Vec<JobResult>,
    pub skipped: Vec<Skipped>,
}

enum JobOutput {
    Done(JobResult),
    Skip(SkipReason),
}

/// Pooled precision: total correct over total predictions.
pub fn precision(results: &[JobResult]) -> Result<f64> {
    let total: u64 = results.iter().map(|r| r.total as u64).sum();
    if total == 0 {
        return Err(Error::Empty("outcomes"));
    }
    Ok(correct_count(results) as f64 / total as f64)
}

pub fn correct_count(results: &[JobResult]) -> u64 {
    results.iter().map(|r| r.correct as u64).sum()
}

fn run_jobs(
    model_id: &str,
    label: &str,
    nodes: &[u32],
    ks: &[usize],
    replicates: u32,
    job: impl Fn(u32, usize, u32, u64) -> Result<JobOutput> + Sync,
    global_seed: u64,
) -> Result<TaskRun> {
    let coords: Vec<(u32, usize, u32)> = nodes
        .iter()
        .flat_map(|&n| ks.iter().flat_map(move |&k| (0..replicates).map(move |r| (n, k, r))))
        .collect();
    let outputs: Vec<Result<JobOutput>> = coords
        .par_iter()
        .map(|&(node, k, rep)| {
            job(node, k, rep, job_seed(global_seed, model_id, label, node, k, rep))
                .map_err(|e| e.context(format!("model {model_id}, label {label}, node {node}, k {k}, replicate {rep}")))
        })
        .collect();
    let mut run = TaskRun {
        model_id: model_id.to_owned(),
        label: label.to_owned(),
        results: Vec::new(),
        skipped: Vec::new(),
    };
    for (&(node, k, replicate), out) in coords.iter().zip(outputs) {
        match out? {
            JobOutput::Done(r) => run.results.push(r),
            JobOutput::Skip(reason) => run.skipped.push(Skipped { node, k, replicate, reason }),
        }
    }
    Ok(run)
}

/// Inputs for collective classification: training data and labels come
/// from one partition, the evaluated nodes and their attributes from another.
#[derive(Debug, Clone, Copy)]
pub struct CcInput<'a> {
    pub train: &'a AttributeMatrix,
    pub train_labels: &'a LabelSet,
    pub eval: &'a AttributeMatrix,
    pub eval_labels: &'a LabelSet,
}

/// Label-oracle collective classification. Each positive node of the
/// evaluation label set trains on `U = sample_subset(W, i, k)` and counts
/// as correct when its classifier outputs positive.
pub fn run_cc(input: CcInput<'_>, weights: &NodeWeightModel, model_id: &str, settings: &EvalSettings) -> Result<TaskRun> {
    settings.validate()?;
    let nodes: Vec<u32> = input.eval_labels.positives.iter().copied().collect();
    if nodes.is_empty() {
        return Err(Error::Empty("evaluation positives"));
    }
    let mask = input.train_labels.mask(input.train.node_count());
    let label = input.eval_labels.name.as_str();
    run_jobs(
        model_id,
        label,
        &nodes,
        &settings.k_grid,
        settings.replicates,
        |node, k, replicate, seed| {
            let subset = weights.sample_subset(node, k, seed);
            if subset.is_empty() {
                return Ok(JobOutput::Skip(SkipReason::EmptySubset));
            }
            let rows: Vec<&SparseVec> = subset.iter().map(|&u| input.train.row(u)).collect();
            let labels: Vec<bool> = subset.iter().map(|&u| mask[u as usize]).collect();
            let c = train_classifier(&rows, &labels, &settings.predictor, derive(seed, 1))?;
            let correct = c.predict(input.eval.row(node));
            Ok(JobOutput::Done(JobResult {
                node,
                k,
                replicate,
                correct: correct as u32,
                total: 1,
                cost: mdl::cost(&c, settings.codec)? as u32,
            }))
        },
        settings.seed,
    )
}

/// Nodes touched by the CC predictors of `run` at the given per-node subset
/// sizes, re-deriving each sampled subset from its job seed.
pub fn cc_reach(run: &TaskRun, weights: &NodeWeightModel, kappa: &BTreeMap<u32, usize>, settings: &EvalSettings) -> ReachSet {
    let mut reach = ReachSet::new();
    for r in &run.results {
        if kappa.get(&r.node) == Some(&r.k) {
            let seed = job_seed(settings.seed, &run.model_id, &run.label, r.node, r.k, r.replicate);
            reach.add(r.node, &weights.sample_subset(r.node, r.k, seed));
        }
    }
    reach
}

/// Inputs for link prediction: a network and attributes to train on and a
/// second pair (usually a later partition) to evaluate on.
#[derive(Debug, Clone, Copy)]
pub struct LpInput<'a> {
    pub train: &'a AttributeMatrix,
    pub train_edges: &'a EdgeSet,
    pub eval: &'a AttributeMatrix,
    pub eval_edges: &'a EdgeSet,
}

/// `{i} ∪ out-neighbors(i)`, sorted.
pub fn egonet(edges: &EdgeSet, node: u32) -> Vec<u32> {
    let mut ego: Vec<u32> = edges.out_neighbors(node).to_vec();
    ego.push(node);
    ego.sort_unstable();
    ego.dedup();
    ego
}

/// Balanced pair set inside an egonet: every induced edge (either
/// direction) and as many sampled non-adjacent pairs, if that many exist.
pub fn egonet_pairs(edges: &EdgeSet, ego: &[u32], rng: &mut impl rand::Rng) -> (Vec<(u32, u32)>, Vec<(u32, u32)>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (a, &u) in ego.iter().enumerate() {
        for &v in &ego[a + 1..] {
            if edges.contains(u, v) || edges.contains(v, u) {
                pos.push((u, v));
            } else {
                neg.push((u, v));
            }
        }
    }
    let take = pos.len().min(neg.len());
    let (chosen, _) = neg.partial_shuffle(rng, take);
    let mut neg = chosen.to_vec();
    neg.sort_unstable();
    (pos, neg)
}

/// `|a − b|` (or `a − b`) as a sparse vector.
pub fn pair_difference(a: &SparseVec, b: &SparseVec, mode: PairFeature) -> SparseVec {
    let (x, y) = (a.entries(), b.entries());
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let (item, d) = if j == y.len() || (i < x.len() && x[i].0 < y[j].0) {
            i += 1;
            (x[i - 1].0, x[i - 1].1)
        } else if i == x.len() || y[j].0 < x[i].0 {
            j += 1;
            (y[j - 1].0, -y[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (x[i - 1].0, x[i - 1].1 - y[j - 1].1)
        };
        let d = match mode {
            PairFeature::Absolute => d.abs(),
            PairFeature::Signed => d,
        };
        if d != 0.0 {
            out.push((item, d));
        }
    }
    SparseVec::from_sorted(out)
}

/// Egonet link prediction for each node in `nodes`; `k` is unused and
/// recorded as 0.
pub fn run_lp(input: LpInput<'_>, nodes: &[u32], model_id: &str, settings: &EvalSettings) -> Result<TaskRun> {
    settings.validate()?;
    if input.train_edges.edge_count() == 0 {
        return Err(Error::Empty("link prediction training network"));
    }
    let mode = settings.pair_feature;
    run_jobs(
        model_id,
        LP_LABEL,
        nodes,
        &[0],
        settings.replicates,
        |node, _, replicate, seed| {
            let mut rng = rng_from(derive(seed, 2));
            let (pos, neg) = egonet_pairs(input.train_edges, &egonet(input.train_edges, node), &mut rng);
            if pos.len() < 2 {
                return Ok(JobOutput::Skip(SkipReason::FewEgonetEdges));
            }
            let diff = |attrs: &AttributeMatrix, (u, v): (u32, u32)| pair_difference(attrs.row(u), attrs.row(v), mode);
            let rows: Vec<SparseVec> = pos.iter().chain(&neg).map(|&p| diff(input.train, p)).collect();
            let labels: Vec<bool> = (0..rows.len()).map(|r| r < pos.len()).collect();
            let refs: Vec<&SparseVec> = rows.iter().collect();
            let c = train_classifier(&refs, &labels, &settings.predictor, derive(seed, 1))?;

            let (epos, eneg) = egonet_pairs(input.eval_edges, &egonet(input.eval_edges, node), &mut rng);
            if epos.is_empty() && eneg.is_empty() {
                return Ok(JobOutput::Skip(SkipReason::NoEvaluationPairs));
            }
            let correct = epos.iter().filter(|&&p| c.predict(&diff(input.eval, p))).count()
                + eneg.iter().filter(|&&p| !c.predict(&diff(input.eval, p))).count();
            Ok(JobOutput::Done(JobResult {
                node,
                k: 0,
                replicate,
                correct: correct as u32,
                total: (epos.len() + eneg.len()) as u32,
                cost: mdl::cost(&c, settings.codec)? as u32,
            }))
        },
        settings.seed,
    )
}

/// Per-node efficiency from replicate medians of correct and cost at each
/// `k`. Grid points where every replicate was skipped are left out; nodes
/// with no usable grid point are dropped.
pub fn node_efficiencies(run: &TaskRun) -> Result<Vec<NodeEfficiency>> {
    let mut grid: BTreeMap<u32, BTreeMap<usize, (Vec<f64>, Vec<f64>)>> = BTreeMap::new();
    for r in &run.results {
        let cell = grid.entry(r.node).or_default().entry(r.k).or_default();
        cell.0.push(r.correct as f64);
        cell.1.push(r.cost as f64);
    }
    let mut out = Vec::with_capacity(grid.len());
    for (node, by_k) in grid {
        let ks: Vec<usize> = by_k.keys().copied().collect();
        let correct: Vec<f64> = by_k.values().map(|c| stats::median(&c.0).unwrap_or(0.0)).collect();
        let cost: Vec<f64> = by_k.values().map(|c| stats::median(&c.1).unwrap_or(0.0)).collect();
        let (efficiency, kappa) = node_efficiency(&ks, &correct, &cost)?;
        let j = ks.iter().position(|&k| k == kappa).expect("kappa from grid");
        out.push(NodeEfficiency {
            node,
            kappa,
            correct: correct[j],
            cost: cost[j],
            efficiency,
        });
    }
    Ok(out)
}

/// Replicate-level summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub precision: Vec<f64>,
    pub cost: Vec<f64>,
    pub median_precision: f64,
    pub median_cost: f64,
    pub cv_precision: f64,
    pub cv_cost: f64,
    /// Set when fewer than two replicates exist and the CVs are reported as 0.
    pub cv_undefined: bool,
}

/// Precision and total predictor cost of each replicate, with medians and
/// coefficients of variation (σ/μ) across replicates.
pub fn bootstrap_eval(run: &TaskRun) -> Result<BootstrapSummary> {
    let mut per_rep: BTreeMap<u32, (u64, u64, f64)> = BTreeMap::new();
    for r in &run.results {
        let e = per_rep.entry(r.replicate).or_default();
        e.0 += r.correct as u64;
        e.1 += r.total as u64;
        e.2 += r.cost as f64;
    }
    let reps: Vec<&(u64, u64, f64)> = per_rep.values().filter(|r| r.1 > 0).collect();
    if reps.is_empty() {
        return Err(Error::Empty("outcomes"));
    }
    let precision: Vec<f64> = reps.iter().map(|r| r.0 as f64 / r.1 as f64).collect();
    let cost: Vec<f64> = reps.iter().map(|r| r.2).collect();
    let cv_undefined = reps.len() < 2;
    Ok(BootstrapSummary {
        median_precision: stats::median(&precision).unwrap_or(0.0),
        median_cost: stats::median(&cost).unwrap_or(0.0),
        cv_precision: stats::coefficient_of_variation(&precision).unwrap_or(0.0),
        cv_cost: stats::coefficient_of_variation(&cost).unwrap_or(0.0),
        cv_undefined,
        precision,
        cost,
    })
}

#[cfg(test)]
mod tests;
