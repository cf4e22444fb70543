//! End-to-end runs: ingest or synthesize → infer → evaluate → select →
//! significance → noise → report.
//!
//! Each stage reads and writes artifacts in the output directory and is
//! skipped when its recorded inputs and config hash still match. Running a
//! single stage whose upstream artifacts were produced under another config
//! (or edited since) is refused unless forced.

mod config;
mod report;
mod scoring;
mod store;
mod summary;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::dataset::{self, Dataset, Partition};
use crate::error::{Error, Result};
use crate::network::write_edge_list;
use crate::predict::TaskRun;
use crate::seed::SeedBuilder;
use crate::select::{noise_sweep, significance, Metric};
use crate::weights::NodeWeightModel;

pub use config::{
    DatasetConfig, EvaluationConfig, ModelDef, NetworkConfig, NoiseConfig, RunConfig, Task, WeightsConfig, NO_NETWORK,
};
pub use report::{write_csv, NoiseReport, SignificanceRow};
pub use scoring::{
    build_weights, lp_model_id, lp_nodes, score_cc_model, score_lp_model, select_labels, Evaluation, NetworkSet, Scored,
    ScoredModel,
};
pub use store::{read_artifact, write_artifact, ArtifactRecord, RunManifest};
pub use summary::{summarize, EfficiencyRow, MatchRow, PerfRow, RankRow, Selection, TaskSelection, TauRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Synth,
    Infer,
    Evaluate,
    Select,
    Significance,
    Noise,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Synth => "synth",
            Stage::Infer => "infer",
            Stage::Evaluate => "evaluate",
            Stage::Select => "select",
            Stage::Significance => "significance",
            Stage::Noise => "noise",
            Stage::Report => "report",
        }
    }

    fn inputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest | Stage::Synth => &[],
            Stage::Infer => &["dataset"],
            Stage::Evaluate => &["dataset", "networks"],
            Stage::Select | Stage::Significance => &["evaluation"],
            Stage::Noise => &["dataset", "weights", "evaluation", "selection"],
            Stage::Report => &["evaluation", "selection", "significance", "noise"],
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest | Stage::Synth => &["dataset"],
            Stage::Infer => &["networks"],
            Stage::Evaluate => &["weights", "evaluation"],
            Stage::Select => &["selection"],
            Stage::Significance => &["significance"],
            Stage::Noise => &["noise"],
            Stage::Report => &[],
        }
    }
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    force: bool,
    config_hash: String,
    manifest: RunManifest,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    /// Validates the config and opens (or creates) its output directory.
    pub fn new(cfg: RunConfig, force: bool) -> Result<Pipeline> {
        cfg.validate()?;
        let out = cfg.out.clone();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let mut manifest = RunManifest::load(&out)?;
        let config_hash = cfg.content_hash();
        manifest.config_hash = config_hash.clone();
        manifest.cached.clear();
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cfg.workers {
            pool = pool.num_threads(n);
        }
        let pool = pool
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Pipeline {
            cfg,
            out,
            force,
            config_hash,
            manifest,
            pool,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    /// The stage producing the dataset for this config.
    pub fn source_stage(&self) -> Stage {
        if self.cfg.synthetic.is_some() {
            Stage::Synth
        } else {
            Stage::Ingest
        }
    }

    /// Runs every stage in order.
    pub fn run_all(&mut self) -> Result<RunManifest> {
        for stage in [
            self.source_stage(),
            Stage::Infer,
            Stage::Evaluate,
            Stage::Select,
            Stage::Significance,
            Stage::Noise,
            Stage::Report,
        ] {
            self.run_stage(stage)?;
        }
        Ok(self.manifest.clone())
    }

    fn external_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut m = BTreeMap::new();
        if let (Stage::Ingest, Some(d)) = (stage, &self.cfg.dataset) {
            for p in [Some(&d.events), Some(&d.groups), d.explicit_edges.as_ref()].into_iter().flatten() {
                let h = store::file_hash(p)?.ok_or_else(|| Error::Config(format!("missing input file {}", p.display())))?;
                m.insert(format!("file:{}", p.display()), h);
            }
        }
        Ok(m)
    }

    /// Hashes of the stage's inputs, refusing stale or missing ones.
    fn check_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut hashes = self.external_inputs(stage)?;
        for &name in stage.inputs() {
            let stale = |reason: &str| Error::Stale {
                artifact: name.into(),
                reason: reason.into(),
            };
            let on_disk = store::file_hash(&store::artifact_path(&self.out, name))?;
            let (Some(rec), Some(h)) = (self.manifest.artifacts.get(name), on_disk) else {
                return Err(stale("missing; run the stage that produces it first"));
            };
            if !self.force {
                if rec.hash != h {
                    return Err(stale("file changed since it was written"));
                }
                if rec.config_hash != self.config_hash {
                    return Err(stale("produced under a different configuration"));
                }
            }
            hashes.insert(name.into(), h);
        }
        Ok(hashes)
    }

    fn up_to_date(&self, stage: Stage, inputs: &BTreeMap<String, String>) -> Result<bool> {
        if stage.outputs().is_empty() {
            return Ok(false);
        }
        for &name in stage.outputs() {
            let Some(rec) = self.manifest.artifacts.get(name) else {
                return Ok(false);
            };
            let on_disk = store::file_hash(&store::artifact_path(&self.out, name))?;
            if on_disk.as_ref() != Some(&rec.hash) || rec.config_hash != self.config_hash || &rec.inputs != inputs {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn save<T: serde::Serialize>(&mut self, name: &str, value: &T, inputs: &BTreeMap<String, String>) -> Result<()> {
        let hash = write_artifact(&self.out, name, value)?;
        self.manifest.artifacts.insert(
            name.into(),
            ArtifactRecord {
                hash,
                config_hash: self.config_hash.clone(),
                inputs: inputs.clone(),
            },
        );
        Ok(())
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        match (stage, self.cfg.synthetic.is_some()) {
            (Stage::Ingest, true) => return Err(Error::Config("config has [synthetic]; use synth".into())),
            (Stage::Synth, false) => return Err(Error::Config("config has [dataset]; use ingest".into())),
            _ => {}
        }
        let inputs = self.check_inputs(stage)?;
        if self.up_to_date(stage, &inputs)? {
            log::info!("{}: up to date", stage.name());
            self.manifest.cached.push(stage.name().into());
            return self.manifest.save(&self.out);
        }
        log::info!("{}: running", stage.name());
        let start = Instant::now();
        let pool = std::mem::replace(&mut self.pool, rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap());
        let result = pool.install(|| self.execute(stage, &inputs));
        self.pool = pool;
        self.manifest
            .timings
            .insert(stage.name().into(), start.elapsed().as_secs_f64());
        self.manifest.save(&self.out)?;
        result.map_err(|e| e.context(format!("stage {}", stage.name())))
    }

    fn execute(&mut self, stage: Stage, inputs: &BTreeMap<String, String>) -> Result<()> {
        let out = self.out.clone();
        match stage {
            Stage::Ingest => {
                let d = self.cfg.dataset.clone().expect("validated");
                let log = dataset::load_events(&d.events, &d.columns()?)?;
                if log.is_empty() {
                    return Err(Error::Empty("event log"));
                }
                let groups = dataset::load_item_groups(&d.groups, &log.items, d.top_items)?;
                let explicit = match &d.explicit_edges {
                    Some(p) => {
                        let (e, report) = crate::network::load_explicit(p, &log.nodes)?;
                        if report.self_loops + report.duplicates > 0 {
                            log::warn!(
                                "explicit edges: dropped {} self-loops and {} duplicates",
                                report.self_loops,
                                report.duplicates
                            );
                        }
                        Some(e)
                    }
                    None => None,
                };
                let ds = Dataset::from_event_log(&log, d.fractions, &groups, d.labels, explicit)?;
                dataset::write_id_map(&out.join("node_ids.csv"), &ds.node_ids)?;
                self.save("dataset", &ds, inputs)
            }
            Stage::Synth => {
                let spec = self.cfg.synthetic.clone().expect("validated");
                let ds = dataset::generate_synthetic(&spec)?;
                self.save("dataset", &ds, inputs)
            }
            Stage::Infer => {
                let ds: Dataset = read_artifact(&out, "dataset")?;
                let specs = self.cfg.networks.iter().map(|n| n.to_spec()).collect::<Result<Vec<_>>>()?;
                let nets = NetworkSet::infer(specs, &ds)?;
                let dir = out.join("networks");
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for (name, edges) in &nets.edges {
                    write_edge_list(&dir.join(format!("{name}.tsv")), &edges[Partition::Training.index()])?;
                }
                self.save("networks", &nets, inputs)
            }
            Stage::Evaluate => self.evaluate(inputs),
            Stage::Select => {
                let eval: Evaluation = read_artifact(&out, "evaluation")?;
                let sel = summarize(&eval, &self.cfg.tasks, self.cfg.evaluation.top)?;
                self.save("selection", &sel, inputs)
            }
            Stage::Significance => {
                let eval: Evaluation = read_artifact(&out, "evaluation")?;
                let rows = significance_table(&eval, self.cfg.evaluation.lambda)?;
                self.save("significance", &rows, inputs)
            }
            Stage::Noise => {
                let report = self.noise()?;
                self.save("noise", &report, inputs)
            }
            Stage::Report => {
                let eval: Evaluation = read_artifact(&out, "evaluation")?;
                let sel: Selection = read_artifact(&out, "selection")?;
                let sig: Vec<SignificanceRow> = read_artifact(&out, "significance")?;
                let noise: NoiseReport = read_artifact(&out, "noise")?;
                self.manifest.report_files = report::write_reports(&out, &eval, &sel, &sig, &noise)?;
                Ok(())
            }
        }
    }

    fn evaluate(&mut self, inputs: &BTreeMap<String, String>) -> Result<()> {
        let out = self.out.clone();
        let ds: Dataset = read_artifact(&out, "dataset")?;
        let nets: NetworkSet = read_artifact(&out, "networks")?;
        let labels = select_labels(&self.cfg, &ds)?;
        let settings = self.cfg.eval_settings();
        let weights = if self.cfg.tasks.contains(&Task::Cc) {
            build_weights(&self.cfg, &ds, &nets)?
        } else {
            BTreeMap::new()
        };
        let mut eval = Evaluation {
            labels: labels.iter().map(|&l| ds.label_names()[l].clone()).collect(),
            scores: Vec::new(),
        };
        let mut outcomes: BTreeMap<Partition, Vec<TaskRun>> = BTreeMap::new();
        let mut skipped = 0;
        let keep_runs = self.cfg.evaluation.write_outcomes;
        let partitions = [Partition::Validation, Partition::Testing];
        let mut step = |eval: &mut Evaluation, task, def: Option<&ModelDef>, network: Option<String>, scored: Result<Scored>| {
            let s = scored?;
            skipped += s.skipped();
            eval.scores.push(ScoredModel {
                task,
                network,
                weighting: def.map(|d| d.kind),
                skipped: s.skipped(),
                score: s.score.clone(),
            });
            if keep_runs {
                outcomes.entry(s.score.partition).or_default().extend(s.runs);
            }
            Ok::<(), Error>(())
        };
        let mut result = Ok(());
        'outer: {
            if self.cfg.tasks.contains(&Task::Cc) {
                for def in self.cfg.models() {
                    for p in partitions {
                        let scored = score_cc_model(&ds, &weights[&def.id], &def.id, &labels, p, &settings);
                        if let Err(e) = step(&mut eval, Task::Cc, Some(&def), def.network.clone(), scored) {
                            result = Err(e);
                            break 'outer;
                        }
                    }
                }
            }
            if self.cfg.tasks.contains(&Task::Lp) {
                for net in self.cfg.networks.iter().map(|n| n.name.clone()) {
                    for p in partitions {
                        let scored = score_lp_model(&ds, &nets, &net, &lp_nodes(&ds, &labels, p), p, &settings);
                        if let Err(e) = step(&mut eval, Task::Lp, None, Some(net.clone()), scored) {
                            result = Err(e);
                            break 'outer;
                        }
                    }
                }
            }
        }
        if let Err(e) = result {
            // keep whatever finished for inspection
            write_artifact(&out, "evaluation.partial", &eval)?;
            return Err(e);
        }
        self.manifest.skipped_jobs.insert("evaluation".into(), skipped);
        if keep_runs {
            for (p, runs) in &outcomes {
                write_outcomes(&out.join(format!("outcomes_{}.csv", p.as_str())), runs)?;
            }
        }
        self.save("weights", &weights, inputs)?;
        self.save("evaluation", &eval, inputs)
    }

    fn noise(&self) -> Result<NoiseReport> {
        let out = &self.out;
        let eval: Evaluation = read_artifact(out, "evaluation")?;
        let empty = NoiseReport { model: None, points: Vec::new() };
        if !self.cfg.tasks.contains(&Task::Cc) || self.cfg.noise.levels.is_empty() {
            return Ok(empty);
        }
        let weights: BTreeMap<String, NodeWeightModel> = read_artifact(out, "weights")?;
        let sel: Selection = read_artifact(out, "selection")?;
        let val = eval.model_scores(Task::Cc, Partition::Validation);
        let target = match &self.cfg.noise.model {
            Some(m) => m.clone(),
            None => {
                let chosen = sel.task(Task::Cc).and_then(|t| t.selected(Metric::Efficiency)).map(str::to_owned);
                let mut ranked = val.clone();
                ranked.sort_by(|a, b| b.efficiency.total_cmp(&a.efficiency).then(a.model_id.cmp(&b.model_id)));
                match chosen.filter(|c| weights.get(c).is_some_and(|w| w.is_adjacency())) {
                    Some(c) => c,
                    None => match ranked.iter().find(|s| weights[&s.model_id].is_adjacency()) {
                        Some(s) => s.model_id.clone(),
                        None => {
                            log::warn!("noise: no adjacency-based model to rewire");
                            return Ok(empty);
                        }
                    },
                }
            }
        };
        let model = weights
            .get(&target)
            .ok_or_else(|| Error::Config(format!("noise.model {target} is not a configured model")))?;
        let competitors: Vec<f64> = val.iter().filter(|s| s.model_id != target).map(|s| s.efficiency).collect();
        if competitors.len() < 3 {
            log::warn!("noise: significance needs at least 3 competing models, found {}", competitors.len());
            return Ok(empty);
        }
        let ds: Dataset = read_artifact(out, "dataset")?;
        let labels = select_labels(&self.cfg, &ds)?;
        let settings = self.cfg.eval_settings();
        let seed = SeedBuilder::new(self.cfg.seed).with_str("noise").with_str(&target).finish();
        let points = noise_sweep(model, &self.cfg.noise.levels, seed, &competitors, self.cfg.evaluation.lambda, |w| {
            Ok(score_cc_model(&ds, w, &target, &labels, Partition::Validation, &settings)?.score.efficiency)
        })?;
        Ok(NoiseReport {
            model: Some(target),
            points,
        })
    }
}

/// Significance of each CC model's validation efficiency against all others.
pub fn significance_table(eval: &Evaluation, lambda: f64) -> Result<Vec<SignificanceRow>> {
    let val = eval.model_scores(Task::Cc, Partition::Validation);
    if val.len() < 4 {
        if !val.is_empty() {
            log::warn!("significance needs at least 4 models, found {}", val.len());
        }
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(val.len());
    for s in &val {
        let others: Vec<f64> = val.iter().filter(|o| o.model_id != s.model_id).map(|o| o.efficiency).collect();
        rows.push(SignificanceRow {
            model: s.model_id.clone(),
            efficiency: s.efficiency,
            significance: significance(&others, s.efficiency, lambda)?,
        });
    }
    rows.sort_by(|a, b| a.model.cmp(&b.model));
    Ok(rows)
}

fn write_outcomes(path: &Path, runs: &[TaskRun]) -> Result<()> {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .flat_map(|run| {
            run.results.iter().map(move |r| {
                vec![
                    run.model_id.clone(),
                    run.label.clone(),
                    r.node.to_string(),
                    r.k.to_string(),
                    r.replicate.to_string(),
                    r.correct.to_string(),
                ]
            })
        })
        .collect();
    write_csv(path, &["model", "label", "node", "k", "replicate", "correct"], &rows)
}

/// Runs every stage for `cfg`, reusing up-to-date artifacts in its output directory.
pub fn run_pipeline(cfg: RunConfig, force: bool) -> Result<RunManifest> {
    Pipeline::new(cfg, force)?.run_all()
}

#[cfg(test)]
mod tests;
