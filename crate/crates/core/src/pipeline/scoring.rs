//! Builds weight models and scores candidate models on one partition.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::config::{ModelDef, RunConfig, Task};
use crate::dataset::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::mdl::{self, total_efficiency, EfficiencyRecord};
use crate::network::{EdgeSet, NetworkModelSpec};
use crate::predict::{
    cc_reach, egonet, node_efficiencies, precision, run_cc, run_lp, CcInput, EvalSettings, LpInput, TaskRun,
};
use crate::seed::SeedBuilder;
use crate::select::ModelScore;
use crate::weights::{self, NodeWeightModel, ReachSet, WeightKind};

/// Inferred networks, one edge set per partition (validation, training, testing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSet {
    pub specs: Vec<NetworkModelSpec>,
    pub edges: BTreeMap<String, [EdgeSet; 3]>,
}

impl NetworkSet {
    pub fn infer(specs: Vec<NetworkModelSpec>, ds: &Dataset) -> Result<NetworkSet> {
        let mut edges = BTreeMap::new();
        for spec in &specs {
            let built = Partition::ALL.map(|p| {
                spec.build(ds.attributes(p), ds.explicit_edges.as_ref())
                    .map_err(|e| e.context(format!("network {} on {} partition", spec.name, p.as_str())))
            });
            let [a, b, c] = built;
            edges.insert(spec.name.clone(), [a?, b?, c?]);
        }
        Ok(NetworkSet { specs, edges })
    }

    pub fn get(&self, name: &str, partition: Partition) -> Result<&EdgeSet> {
        self.edges
            .get(name)
            .map(|e| &e[partition.index()])
            .ok_or_else(|| Error::Config(format!("unknown network {name}")))
    }
}

/// Weight models for every CC candidate, built from the training partition.
pub fn build_weights(cfg: &RunConfig, ds: &Dataset, nets: &NetworkSet) -> Result<BTreeMap<String, NodeWeightModel>> {
    let train = ds.attributes(Partition::Training);
    let w = &cfg.weights;
    let mut out = BTreeMap::new();
    for ModelDef { id, network, kind } in cfg.models() {
        let net = network.as_deref().map(|n| nets.get(n, Partition::Training)).transpose()?;
        let need = || net.ok_or_else(|| Error::Config(format!("{kind} needs a network")));
        let name = network.as_deref();
        let model = match kind {
            WeightKind::ActivityFlat => weights::make_activity_flat(train),
            WeightKind::DegreeFlat => weights::make_degree_flat(need()?, w.degree_mode, name),
            WeightKind::Cluster => {
                weights::make_cluster(need()?, SeedBuilder::new(cfg.seed).with_str(&id).finish(), name)
            }
            WeightKind::Random => weights::make_random(ds.node_count),
            WeightKind::Bfs => weights::make_bfs(need()?, name),
            WeightKind::ActivityNet => weights::make_activity_net(train, w.exemplar_fraction, w.exemplar_neighbors)?,
            WeightKind::DegreeNet => {
                weights::make_degree_net(need()?, train, w.exemplar_fraction, w.exemplar_neighbors, w.degree_mode, name)?
            }
        };
        out.insert(id, model);
    }
    Ok(out)
}

/// Label sets to evaluate, as indices into the dataset's label lists.
pub fn select_labels(cfg: &RunConfig, ds: &Dataset) -> Result<Vec<usize>> {
    let names = ds.label_names();
    let has_positives = |i: usize| {
        [Partition::Validation, Partition::Testing]
            .iter()
            .all(|&p| !ds.labels(p)[i].positives.is_empty())
    };
    let mut chosen: Vec<usize> = if cfg.evaluation.labels.is_empty() {
        (0..names.len()).filter(|&i| has_positives(i)).collect()
    } else {
        cfg.evaluation
            .labels
            .iter()
            .map(|l| {
                names
                    .iter()
                    .position(|n| n == l)
                    .ok_or_else(|| Error::Config(format!("unknown label set {l:?}")))
            })
            .collect::<Result<_>>()?
    };
    if let Some(m) = cfg.evaluation.max_labels {
        chosen.truncate(m);
    }
    if chosen.is_empty() {
        return Err(Error::Empty("label sets with positives in validation and testing"));
    }
    Ok(chosen)
}

/// Nodes evaluated by link prediction: positives of any chosen label set.
pub fn lp_nodes(ds: &Dataset, labels: &[usize], partition: Partition) -> Vec<u32> {
    let set: BTreeSet<u32> = labels
        .iter()
        .flat_map(|&l| ds.labels(partition)[l].positives.iter().copied())
        .collect();
    set.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub score: ModelScore,
    pub record: EfficiencyRecord,
    pub runs: Vec<TaskRun>,
}

impl Scored {
    pub fn skipped(&self) -> u64 {
        self.runs.iter().map(|r| r.skipped.len() as u64).sum()
    }
}

fn assemble(model_id: &str, partition: Partition, runs: Vec<TaskRun>, netcost: f64, nodes: Vec<mdl::NodeEfficiency>) -> Result<Scored> {
    let all: Vec<_> = runs.iter().flat_map(|r| r.results.iter().copied()).collect();
    let record = total_efficiency(model_id, nodes, netcost)?;
    let score = ModelScore {
        model_id: model_id.to_owned(),
        precision: precision(&all).unwrap_or(0.0),
        correct: record.taskcorrect,
        taskcost: record.taskcost,
        netcost: record.netcost,
        efficiency: record.efficiency,
        partition,
    };
    Ok(Scored { score, record, runs })
}

/// CC precision and efficiency of one weighting over the chosen label
/// sets. Training data is the training partition; evaluated nodes and their
/// attributes come from `partition`. The representation is costed once,
/// restricted to the union of reach sets at each node's κ.
pub fn score_cc_model(
    ds: &Dataset,
    weights: &NodeWeightModel,
    model_id: &str,
    labels: &[usize],
    partition: Partition,
    settings: &EvalSettings,
) -> Result<Scored> {
    let mut runs = Vec::with_capacity(labels.len());
    let mut nodes = Vec::new();
    let mut reach = ReachSet::new();
    for &l in labels {
        let input = CcInput {
            train: ds.attributes(Partition::Training),
            train_labels: &ds.labels(Partition::Training)[l],
            eval: ds.attributes(partition),
            eval_labels: &ds.labels(partition)[l],
        };
        let run = run_cc(input, weights, model_id, settings)?;
        let effs = node_efficiencies(&run)?;
        let kappa: BTreeMap<u32, usize> = effs.iter().map(|n| (n.node, n.kappa)).collect();
        reach.merge(&cc_reach(&run, weights, &kappa, settings));
        nodes.extend(effs);
        runs.push(run);
    }
    let netcost = mdl::cost(&weights.restrict(&reach), settings.codec)? as f64;
    assemble(model_id, partition, runs, netcost, nodes)
}

/// LP precision and efficiency of one network: trained on training-partition
/// egonets, evaluated on `partition` egonets. The network is costed on the
/// subgraph induced by the evaluated nodes' training egonets.
pub fn score_lp_model(
    ds: &Dataset,
    nets: &NetworkSet,
    network: &str,
    nodes: &[u32],
    partition: Partition,
    settings: &EvalSettings,
) -> Result<Scored> {
    let train_edges = nets.get(network, Partition::Training)?;
    let input = LpInput {
        train: ds.attributes(Partition::Training),
        train_edges,
        eval: ds.attributes(partition),
        eval_edges: nets.get(network, partition)?,
    };
    let model_id = lp_model_id(network);
    let run = run_lp(input, nodes, &model_id, settings)?;
    let effs = node_efficiencies(&run)?;
    let mut reach = ReachSet::new();
    for n in &effs {
        reach.add(n.node, &egonet(train_edges, n.node));
    }
    let netcost = mdl::cost(&train_edges.induced(&reach.mask(ds.node_count)), settings.codec)? as f64;
    assemble(&model_id, partition, vec![run], netcost, effs)
}

pub fn lp_model_id(network: &str) -> String {
    format!("{network}/egonet")
}

/// Score row stored in the evaluation artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel {
    pub task: Task,
    pub network: Option<String>,
    pub weighting: Option<WeightKind>,
    pub score: ModelScore,
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub labels: Vec<String>,
    pub scores: Vec<ScoredModel>,
}

impl Evaluation {
    pub fn table(&self, task: Task, partition: Partition) -> Vec<&ScoredModel> {
        self.scores
            .iter()
            .filter(|s| s.task == task && s.score.partition == partition)
            .collect()
    }

    pub fn model_scores(&self, task: Task, partition: Partition) -> Vec<ModelScore> {
        self.table(task, partition).into_iter().map(|s| s.score.clone()).collect()
    }
}
