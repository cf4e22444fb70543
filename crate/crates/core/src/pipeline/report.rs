//! CSV report files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scoring::Evaluation;
use super::summary::{Selection, TAU_BOLD_OVERLAP, TAU_BOLD_P};
use crate::error::{Error, Result};
use crate::select::{NoisePoint, Significance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub model: String,
    pub efficiency: f64,
    pub significance: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub model: Option<String>,
    pub points: Vec<NoisePoint>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every report; returns the file names written.
pub fn write_reports(
    dir: &Path,
    eval: &Evaluation,
    selection: &Selection,
    significance: &[SignificanceRow],
    noise: &NoiseReport,
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        write_csv(&dir.join(name), header, &rows)?;
        files.push(name.to_owned());
        Ok(())
    };

    let mut perf = Vec::new();
    let mut rank = Vec::new();
    let mut tau = Vec::new();
    let mut mm = Vec::new();
    let mut eff = Vec::new();
    for t in &selection.tasks {
        let task = t.task.as_str().to_owned();
        for p in &t.perf {
            let s = &p.stats;
            perf.push(vec![
                task.clone(),
                p.metric.as_str().into(),
                s.selected.clone(),
                num(s.mu),
                num(s.mu_top),
                num(s.p_best),
                num(s.delta_p),
                num(s.rank),
                s.bold.map(|b| b.to_string()).unwrap_or_default(),
            ]);
        }
        for r in &t.rank {
            rank.push(vec![
                task.clone(),
                r.model.clone(),
                num(r.val_precision),
                num(r.val_rank),
                num(r.test_precision),
                num(r.test_rank),
                num(r.val_efficiency),
                num(r.test_efficiency),
            ]);
        }
        for r in &t.tau {
            tau.push(vec![
                task.clone(),
                r.metric.as_str().into(),
                opt(r.tau),
                opt(r.p_value),
                r.intersection.to_string(),
                r.bold.to_string(),
            ]);
        }
        for r in &t.match_mismatch {
            mm.push(vec![task.clone(), r.grouping.clone(), r.partition.as_str().into(), opt(r.delta)]);
        }
        for r in &t.efficiency {
            eff.push(vec![
                task.clone(),
                r.val_rank.to_string(),
                r.model.clone(),
                r.reference.clone(),
                opt(r.efficiency_ratio),
                opt(r.cost_ratio),
                opt(r.correct_ratio),
            ]);
        }
    }
    emit(
        "perf.csv",
        &["task", "selected_by", "selected", "mu", "mu_top", "p_best", "delta_p", "rank", "bold"],
        perf,
    )?;
    emit(
        "rank.csv",
        &[
            "task",
            "model",
            "val_precision",
            "val_rank",
            "test_precision",
            "test_rank",
            "val_efficiency",
            "test_efficiency",
        ],
        rank,
    )?;
    let tau_bold = format!("bold_p_lt_{TAU_BOLD_P}_and_top_overlap_ge_{TAU_BOLD_OVERLAP}");
    emit(
        "tau.csv",
        &["task", "metric", "tau", "p_value", "top_intersection", &tau_bold],
        tau,
    )?;
    emit("match_mismatch.csv", &["task", "grouping", "partition", "delta"], mm)?;
    emit(
        "efficiency.csv",
        &["task", "val_rank", "model", "reference", "efficiency_ratio", "cost_ratio", "correct_ratio"],
        eff,
    )?;

    let cross = selection
        .cross_task
        .iter()
        .flat_map(|m| &m.cells)
        .map(|c| vec![c.select_on.clone(), c.evaluate_on.clone(), c.selected.clone(), num(c.delta_p), num(c.rank)])
        .collect();
    emit("cross_task.csv", &["select_on", "evaluate_on", "selected", "delta_p", "rank"], cross)?;

    let sig = significance
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                num(r.efficiency),
                num(r.significance.score),
                r.significance.significant.to_string(),
                r.significance.degenerate.to_string(),
            ]
        })
        .collect();
    emit("significance.csv", &["model", "efficiency", "score", "significant", "degenerate"], sig)?;

    let noise_rows = noise
        .points
        .iter()
        .map(|p| {
            vec![
                noise.model.clone().unwrap_or_default(),
                num(p.p),
                num(p.efficiency),
                num(p.significance.score),
                p.significance.significant.to_string(),
            ]
        })
        .collect();
    emit("noise.csv", &["model", "p", "efficiency", "score", "significant"], noise_rows)?;

    let scores = eval
        .scores
        .iter()
        .map(|s| {
            vec![
                s.task.as_str().into(),
                s.score.model_id.clone(),
                s.score.partition.as_str().into(),
                num(s.score.precision),
                num(s.score.correct),
                num(s.score.taskcost),
                num(s.score.netcost),
                num(s.score.efficiency),
                s.skipped.to_string(),
            ]
        })
        .collect();
    emit(
        "scores.csv",
        &["task", "model", "partition", "precision", "correct", "taskcost", "netcost", "efficiency", "skipped"],
        scores,
    )?;
    Ok(files)
}

