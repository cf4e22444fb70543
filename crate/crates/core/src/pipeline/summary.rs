//! Selection and consistency statistics over the scored model tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{Task, NO_NETWORK};
use super::scoring::{lp_model_id, Evaluation};
use crate::dataset::Partition;
use crate::error::Result;
use crate::select::{
    consistency_stats, cross_task_matrix, kendall_tau, match_mismatch_delta, select_best, topk_intersection,
    ConsistencyStats, CrossTaskMatrix, Metric, ModelScore, Ranking, TaskPrecision,
};

/// Tau rows are bold when p < this and the top-k intersection reaches [`TAU_BOLD_OVERLAP`].
pub const TAU_BOLD_P: f64 = 0.001;
pub const TAU_BOLD_OVERLAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRow {
    pub metric: Metric,
    pub stats: ConsistencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub model: String,
    pub val_precision: f64,
    pub val_rank: f64,
    pub test_precision: f64,
    pub test_rank: f64,
    pub val_efficiency: f64,
    pub test_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub metric: Metric,
    pub tau: Option<f64>,
    pub p_value: Option<f64>,
    pub intersection: usize,
    pub bold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub grouping: String,
    pub partition: Partition,
    pub delta: Option<f64>,
}

/// A top validation-efficiency model against the test model with the most
/// correct predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub val_rank: usize,
    pub model: String,
    pub reference: String,
    pub efficiency_ratio: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub correct_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSelection {
    pub task: Task,
    pub perf: Vec<PerfRow>,
    pub rank: Vec<RankRow>,
    pub tau: Vec<TauRow>,
    pub match_mismatch: Vec<MatchRow>,
    pub efficiency: Vec<EfficiencyRow>,
}

impl TaskSelection {
    pub fn selected(&self, metric: Metric) -> Option<&str> {
        self.perf.iter().find(|p| p.metric == metric).map(|p| p.stats.selected.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tasks: Vec<TaskSelection>,
    pub cross_task: Option<CrossTaskMatrix>,
}

impl Selection {
    pub fn task(&self, task: Task) -> Option<&TaskSelection> {
        self.tasks.iter().find(|t| t.task == task)
    }
}

fn percentile(ranking: &Ranking) -> BTreeMap<&str, f64> {
    let n = ranking.models.len() as f64;
    ranking
        .models
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), (n - i as f64) / n))
        .collect()
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

fn summarize_task(eval: &Evaluation, task: Task, top: usize) -> Result<TaskSelection> {
    let val = eval.model_scores(task, Partition::Validation);
    let test = eval.model_scores(task, Partition::Testing);
    let by_id = |t: &[ModelScore]| -> BTreeMap<String, ModelScore> {
        t.iter().map(|s| (s.model_id.clone(), s.clone())).collect()
    };
    let (vmap, tmap) = (by_id(&val), by_id(&test));

    let mut perf = Vec::new();
    let metrics = [Metric::Precision, Metric::Efficiency];
    for metric in metrics {
        let selected = select_best(&val, metric)?;
        perf.push(PerfRow {
            metric,
            stats: consistency_stats(&test, &selected, top)?,
        });
    }

    let (vr, tr) = (Ranking::new(&val, Metric::Precision), Ranking::new(&test, Metric::Precision));
    let (vp, tp) = (percentile(&vr), percentile(&tr));
    let rank = vr
        .models
        .iter()
        .map(|m| RankRow {
            model: m.clone(),
            val_precision: vmap[m].precision,
            val_rank: vp[m.as_str()],
            test_precision: tmap[m].precision,
            test_rank: tp[m.as_str()],
            val_efficiency: vmap[m].efficiency,
            test_efficiency: tmap[m].efficiency,
        })
        .collect();

    let mut tau = Vec::new();
    for metric in metrics {
        let ids: Vec<&String> = vmap.keys().collect();
        let x: Vec<f64> = ids.iter().map(|m| vmap[*m].value(metric)).collect();
        let y: Vec<f64> = ids.iter().map(|m| tmap[*m].value(metric)).collect();
        let k = kendall_tau(&x, &y).ok();
        let intersection = topk_intersection(&Ranking::new(&val, metric), &Ranking::new(&test, metric), top);
        tau.push(TauRow {
            metric,
            tau: k.map(|k| k.tau),
            p_value: k.map(|k| k.p_value),
            intersection,
            bold: k.is_some_and(|k| k.p_value < TAU_BOLD_P) && intersection >= TAU_BOLD_OVERLAP,
        });
    }

    let mut match_mismatch = Vec::new();
    if task == Task::Cc {
        for grouping in ["network", "weighting"] {
            for (partition, table) in [(Partition::Validation, &val), (Partition::Testing, &test)] {
                let values: Vec<(String, f64)> = table
                    .iter()
                    .map(|s| {
                        let (net, weighting) = s.model_id.split_once('/').unwrap_or((NO_NETWORK, &s.model_id));
                        let g = if grouping == "network" { net } else { weighting };
                        (g.to_owned(), s.precision)
                    })
                    .collect();
                let delta = match_mismatch_delta(&values);
                if let Err(e) = &delta {
                    log::info!("match/mismatch by {grouping} on {} skipped: {e}", partition.as_str());
                }
                match_mismatch.push(MatchRow {
                    grouping: grouping.into(),
                    partition,
                    delta: delta.ok(),
                });
            }
        }
    }

    let mut by_correct = test.clone();
    by_correct.sort_by(|a, b| b.correct.total_cmp(&a.correct).then(a.model_id.cmp(&b.model_id)));
    let reference = &by_correct[0];
    let efficiency = Ranking::new(&val, Metric::Efficiency)
        .top(top)
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let t = &tmap[m];
            EfficiencyRow {
                val_rank: i + 1,
                model: m.clone(),
                reference: reference.model_id.clone(),
                efficiency_ratio: ratio(t.efficiency, reference.efficiency),
                cost_ratio: ratio(t.taskcost + t.netcost, reference.taskcost + reference.netcost),
                correct_ratio: ratio(t.correct, reference.correct),
            }
        })
        .collect();

    Ok(TaskSelection {
        task,
        perf,
        rank,
        tau,
        match_mismatch,
        efficiency,
    })
}

/// CC models paired with their network's LP scores; network-free
/// weightings have no LP score and drop out.
fn cross_task(eval: &Evaluation) -> Result<Option<CrossTaskMatrix>> {
    let lp: BTreeMap<String, TaskPrecision> = eval
        .table(Task::Lp, Partition::Validation)
        .iter()
        .filter_map(|s| {
            let t = eval
                .table(Task::Lp, Partition::Testing)
                .into_iter()
                .find(|x| x.score.model_id == s.score.model_id)?;
            Some((
                s.score.model_id.clone(),
                TaskPrecision {
                    validation: s.score.precision,
                    testing: t.score.precision,
                },
            ))
        })
        .collect();
    if lp.is_empty() {
        return Ok(None);
    }
    let mut table: BTreeMap<String, BTreeMap<String, TaskPrecision>> = BTreeMap::new();
    for v in eval.table(Task::Cc, Partition::Validation) {
        let Some(t) = eval
            .table(Task::Cc, Partition::Testing)
            .into_iter()
            .find(|x| x.score.model_id == v.score.model_id)
        else {
            continue;
        };
        let entry = table.entry(v.score.model_id.clone()).or_default();
        entry.insert(
            Task::Cc.as_str().into(),
            TaskPrecision {
                validation: v.score.precision,
                testing: t.score.precision,
            },
        );
        if let Some(p) = v.network.as_deref().and_then(|n| lp.get(&lp_model_id(n))) {
            entry.insert(Task::Lp.as_str().into(), *p);
        }
    }
    if table.is_empty() {
        return Ok(None);
    }
    let m = cross_task_matrix(&table)?;
    if !m.excluded.is_empty() {
        log::info!("cross-task table excludes models without an LP score: {}", m.excluded.join(", "));
    }
    Ok(Some(m))
}

pub fn summarize(eval: &Evaluation, tasks: &[Task], top: usize) -> Result<Selection> {
    let mut out = Vec::new();
    for &task in tasks {
        out.push(summarize_task(eval, task, top)?);
    }
    let cross = if tasks.contains(&Task::Cc) && tasks.contains(&Task::Lp) {
        cross_task(eval)?
    } else {
        None
    };
    Ok(Selection {
        tasks: out,
        cross_task: cross,
    })
}
