//! Model ranking and selection, validation/test consistency statistics,
//! and the efficiency significance score.

mod kendall;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::Partition;
use crate::error::{Error, Result};
use crate::network::rewire;
use crate::stats;
use crate::weights::NodeWeightModel;

pub use kendall::{kendall_tau, kendall_tau_brute, KendallTau};

/// Top-`k` size used for μ₍₁₀₎ and ranking intersections.
pub const DEFAULT_TOP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Precision,
    Efficiency,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Efficiency => "efficiency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model_id: String,
    pub precision: f64,
    pub correct: f64,
    pub taskcost: f64,
    pub netcost: f64,
    pub efficiency: f64,
    pub partition: Partition,
}

impl ModelScore {
    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Precision => self.precision,
            Metric::Efficiency => self.efficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: Metric,
    /// Best first; ties broken by ascending model id.
    pub models: Vec<String>,
}

impl Ranking {
    pub fn new(scores: &[ModelScore], metric: Metric) -> Ranking {
        let mut order: Vec<&ModelScore> = scores.iter().collect();
        order.sort_by(|a, b| b.value(metric).total_cmp(&a.value(metric)).then(a.model_id.cmp(&b.model_id)));
        Ranking {
            metric,
            models: order.into_iter().map(|s| s.model_id.clone()).collect(),
        }
    }

    pub fn position(&self, model_id: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model_id)
    }

    pub fn top(&self, k: usize) -> &[String] {
        &self.models[..k.min(self.models.len())]
    }
}

/// Argmax of `metric`, lowest model id among ties.
pub fn select_best(scores: &[ModelScore], metric: Metric) -> Result<String> {
    if scores.is_empty() {
        return Err(Error::Empty("model scores"));
    }
    Ok(Ranking::new(scores, metric).models.swap_remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    pub selected: String,
    /// Mean test precision over all models.
    pub mu: f64,
    /// Mean test precision over the test top-10.
    pub mu_top: f64,
    /// Best test precision.
    pub p_best: f64,
    /// `p_selected − p_best`, never positive.
    pub delta_p: f64,
    /// `(N − position) / N` of the selected model in the test ranking.
    pub rank: f64,
    /// `|Δp| / (p_best − μ) ≤ 0.05`; `None` when `p_best = μ`.
    pub bold: Option<bool>,
}

/// How a model selected on validation fares in the test precision ranking.
pub fn consistency_stats(test: &[ModelScore], selected: &str, top: usize) -> Result<ConsistencyStats> {
    let ranking = Ranking::new(test, Metric::Precision);
    let pos = ranking
        .position(selected)
        .ok_or_else(|| Error::UnknownNode(format!("model {selected} has no test score")))?;
    let by_id: BTreeMap<&str, f64> = test.iter().map(|s| (s.model_id.as_str(), s.precision)).collect();
    let all: Vec<f64> = test.iter().map(|s| s.precision).collect();
    let tops: Vec<f64> = ranking.top(top).iter().map(|m| by_id[m.as_str()]).collect();
    let mu = stats::mean(&all).expect("non-empty");
    let p_best = by_id[ranking.models[0].as_str()];
    let delta_p = by_id[selected] - p_best;
    let spread = p_best - mu;
    let n = test.len() as f64;
    Ok(ConsistencyStats {
        selected: selected.to_owned(),
        mu,
        mu_top: stats::mean(&tops).expect("non-empty"),
        p_best,
        delta_p,
        rank: (n - pos as f64) / n,
        bold: (spread > 0.0).then(|| delta_p.abs() / spread <= 0.05),
    })
}

pub fn topk_intersection(a: &Ranking, b: &Ranking, k: usize) -> usize {
    let ta: BTreeSet<&String> = a.top(k).iter().collect();
    b.top(k).iter().filter(|m| ta.contains(m)).count()
}

/// Median absolute difference over same-group pairs minus the median over
/// cross-group pairs.
pub fn match_mismatch_delta(values: &[(String, f64)]) -> Result<f64> {
    let mut matched = Vec::new();
    let mut mismatched = Vec::new();
    for (i, (gi, pi)) in values.iter().enumerate() {
        for (gj, pj) in &values[i + 1..] {
            if gi == gj { &mut matched } else { &mut mismatched }.push((pi - pj).abs());
        }
    }
    match (stats::median(&matched), stats::median(&mismatched)) {
        (Some(m), Some(x)) => Ok(m - x),
        (None, _) => Err(Error::Degenerate("grouping has no matched pairs".into())),
        (_, None) => Err(Error::Degenerate("grouping needs at least two groups".into())),
    }
}

/// Scores of one model on both partitions for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskPrecision {
    pub validation: f64,
    pub testing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTaskCell {
    /// Task used for selection, or `"joint"` for the mean over tasks.
    pub select_on: String,
    pub evaluate_on: String,
    pub selected: String,
    pub delta_p: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTaskMatrix {
    pub cells: Vec<CrossTaskCell>,
    /// Models lacking a score on some task.
    pub excluded: Vec<String>,
}

/// Select on one task's validation precision (or the mean over all tasks)
/// and report Δp and rank on each task's test precision.
pub fn cross_task_matrix(scores: &BTreeMap<String, BTreeMap<String, TaskPrecision>>) -> Result<CrossTaskMatrix> {
    let tasks: BTreeSet<&String> = scores.values().flat_map(|t| t.keys()).collect();
    let (complete, excluded): (Vec<_>, Vec<_>) = scores.iter().partition(|(_, t)| tasks.iter().all(|k| t.contains_key(*k)));
    if complete.is_empty() {
        return Err(Error::Empty("models scored on every task"));
    }
    let table = |f: &dyn Fn(&BTreeMap<String, TaskPrecision>) -> f64, partition| -> Vec<ModelScore> {
        complete
            .iter()
            .map(|(id, t)| ModelScore {
                model_id: (*id).clone(),
                precision: f(t),
                correct: 0.0,
                taskcost: 0.0,
                netcost: 0.0,
                efficiency: 0.0,
                partition,
            })
            .collect()
    };
    let mut rows: Vec<(String, Vec<ModelScore>)> = tasks
        .iter()
        .map(|&task| (task.clone(), table(&|t| t[task].validation, Partition::Validation)))
        .collect();
    if tasks.len() > 1 {
        let joint = |t: &BTreeMap<String, TaskPrecision>| t.values().map(|p| p.validation).sum::<f64>() / t.len() as f64;
        rows.push(("joint".into(), table(&joint, Partition::Validation)));
    }
    let mut cells = Vec::new();
    for (select_on, val) in &rows {
        let selected = select_best(val, Metric::Precision)?;
        for &task in &tasks {
            let test = table(&|t| t[task].testing, Partition::Testing);
            let c = consistency_stats(&test, &selected, DEFAULT_TOP)?;
            cells.push(CrossTaskCell {
                select_on: select_on.clone(),
                evaluate_on: task.clone(),
                selected: selected.clone(),
                delta_p: c.delta_p,
                rank: c.rank,
            });
        }
    }
    Ok(CrossTaskMatrix {
        cells,
        excluded: excluded.into_iter().map(|(id, _)| id.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub score: f64,
    pub significant: bool,
    /// The interquartile range of competitor differences was zero.
    pub degenerate: bool,
}

/// Robust z-like score of `target` against `others`:
/// `(median_i |e_r − e_i| − median_{i≠j} |e_i − e_j|) / IQR_{i≠j} |e_i − e_j|`.
/// Negative (and never significant) when the target is below the median of
/// the others.
pub fn significance(others: &[f64], target: f64, lambda: f64) -> Result<Significance> {
    if others.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "significance needs at least 3 competitors, got {}",
            others.len()
        )));
    }
    if !target.is_finite() || others.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite);
    }
    let to_target: Vec<f64> = others.iter().map(|e| (target - e).abs()).collect();
    let mut pairwise = Vec::with_capacity(others.len() * (others.len() - 1));
    for (i, a) in others.iter().enumerate() {
        for (j, b) in others.iter().enumerate() {
            if i != j {
                pairwise.push((a - b).abs());
            }
        }
    }
    let numerator = stats::median(&to_target).unwrap() - stats::median(&pairwise).unwrap();
    let iqr = stats::iqr(&pairwise).unwrap();
    let degenerate = iqr == 0.0;
    let mut score = if degenerate {
        if numerator > 0.0 {
            f64::INFINITY
        } else if numerator < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        numerator / iqr
    };
    let below = target < stats::median(others).unwrap();
    if below {
        score = -score.abs();
    }
    Ok(Significance {
        score,
        significant: !below && score >= lambda,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub p: f64,
    pub efficiency: f64,
    pub significance: Significance,
}

/// Rewires the target model's adjacency at each level, re-evaluates only
/// that model through `evaluate`, and scores it against the fixed
/// competitor efficiencies.
pub fn noise_sweep(
    model: &NodeWeightModel,
    p_levels: &[f64],
    seed: u64,
    competitors: &[f64],
    lambda: f64,
    evaluate: impl Fn(&NodeWeightModel) -> Result<f64>,
) -> Result<Vec<NoisePoint>> {
    let Some(adjacency) = model.adjacency() else {
        return Err(Error::NotRewirable(format!("the {} list", model.kind)));
    };
    p_levels
        .iter()
        .map(|&p| {
            let noisy = model.with_adjacency(rewire(adjacency, p, seed)?)?;
            let efficiency = evaluate(&noisy)?;
            Ok(NoisePoint {
                p,
                efficiency,
                significance: significance(competitors, efficiency, lambda)?,
            })
        })
        .collect()
}
