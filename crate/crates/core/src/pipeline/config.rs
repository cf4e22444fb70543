//! TOML run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{ColumnFormat, LabelThresholds, SyntheticSpec};
use crate::error::{Error, Result};
use crate::mdl::{Codec, DEFAULT_K_GRID};
use crate::network::{DensityLabel, EdgeBudget, NetworkKind, NetworkModelSpec};
use crate::predict::{EvalSettings, PairFeature, PredictorParams};
use crate::select::DEFAULT_TOP;
use crate::weights::{DegreeMode, WeightKind, DEFAULT_EXEMPLAR_FRACTION, DEFAULT_EXEMPLAR_NEIGHBORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cc,
    Lp,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Cc => "cc",
            Task::Lp => "lp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Activity log with node, item, value and timestamp columns.
    pub events: PathBuf,
    /// `group,item[,weight]` rows defining the label sets.
    pub groups: PathBuf,
    pub explicit_edges: Option<PathBuf>,
    #[serde(default = "thirds")]
    pub fractions: [f64; 3],
    /// Keep only the top-N items of each group by weight.
    pub top_items: Option<usize>,
    pub delimiter: Option<char>,
    #[serde(default = "col_node")]
    pub node_column: String,
    #[serde(default = "col_item")]
    pub item_column: String,
    #[serde(default = "col_value")]
    pub value_column: String,
    #[serde(default = "col_timestamp")]
    pub timestamp_column: String,
    #[serde(default)]
    pub labels: LabelThresholds,
}

fn thirds() -> [f64; 3] {
    [1.0 / 3.0; 3]
}
fn col_node() -> String {
    "node".into()
}
fn col_item() -> String {
    "item".into()
}
fn col_value() -> String {
    "value".into()
}
fn col_timestamp() -> String {
    "timestamp".into()
}

impl DatasetConfig {
    pub fn columns(&self) -> Result<ColumnFormat> {
        let delimiter = match self.delimiter {
            None => None,
            Some(c) if c.is_ascii() => Some(c as u8),
            Some(c) => return Err(Error::Config(format!("delimiter {c:?} is not ASCII"))),
        };
        Ok(ColumnFormat {
            delimiter,
            node: self.node_column.clone(),
            item: self.item_column.clone(),
            value: self.value_column.clone(),
            timestamp: self.timestamp_column.clone(),
        })
    }
}

/// One candidate network. Similarity networks take exactly one of
/// `density` (sparse or dense), `density_value` or `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub name: String,
    pub kind: NetworkKind,
    pub density: Option<DensityLabel>,
    pub density_value: Option<f64>,
    pub rho: Option<usize>,
    /// Explicit networks: fraction of the given edges to keep (default 1).
    pub fraction: Option<f64>,
}

impl NetworkConfig {
    pub fn to_spec(&self) -> Result<NetworkModelSpec> {
        let bad = |m: &str| Err(Error::Config(format!("network {}: {m}", self.name)));
        if self.kind == NetworkKind::Explicit {
            if self.density.is_some() || self.density_value.is_some() || self.rho.is_some() {
                return bad("explicit networks take only `fraction`");
            }
            let mut spec = NetworkModelSpec::explicit(&self.name);
            spec.budget = EdgeBudget::ExplicitFraction(self.fraction.unwrap_or(1.0));
            return Ok(spec);
        }
        if self.fraction.is_some() {
            return bad("`fraction` applies to explicit networks only");
        }
        let mut spec = match (self.density, self.density_value, self.rho) {
            (Some(DensityLabel::Social), None, None) => return bad("density `social` is for explicit networks"),
            (Some(label), None, None) => NetworkModelSpec::with_density(&self.name, self.kind, label),
            (None, Some(d), None) if (0.0..=1.0).contains(&d) => {
                let mut s = NetworkModelSpec::with_density(&self.name, self.kind, DensityLabel::Dense);
                s.budget = EdgeBudget::Density(d);
                s
            }
            (None, None, Some(rho)) => NetworkModelSpec::knn(&self.name, rho),
            _ => return bad("give exactly one of `density`, `density_value` in [0, 1] or `rho`"),
        };
        spec.kind = self.kind;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub kinds: Vec<WeightKind>,
    pub exemplar_fraction: f64,
    pub exemplar_neighbors: usize,
    pub degree_mode: DegreeMode,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            kinds: WeightKind::ALL.to_vec(),
            exemplar_fraction: DEFAULT_EXEMPLAR_FRACTION,
            exemplar_neighbors: DEFAULT_EXEMPLAR_NEIGHBORS,
            degree_mode: DegreeMode::Total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub k_grid: Vec<usize>,
    /// Bootstrap replicates per (node, k).
    pub replicates: u32,
    pub codec: Codec,
    pub pair_feature: PairFeature,
    /// Label sets to evaluate by name; empty means every label set with
    /// positives in both evaluation partitions.
    pub labels: Vec<String>,
    pub max_labels: Option<usize>,
    /// Significance threshold.
    pub lambda: f64,
    /// Top-k used for μ₍₁₀₎, intersections and the efficiency table.
    pub top: usize,
    /// Also write per-job outcome CSVs.
    pub write_outcomes: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            k_grid: DEFAULT_K_GRID.to_vec(),
            replicates: 20,
            codec: Codec::Lz4,
            pair_feature: PairFeature::Absolute,
            labels: Vec::new(),
            max_labels: None,
            lambda: 1.0,
            top: DEFAULT_TOP,
            write_outcomes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub levels: Vec<f64>,
    /// Model to rewire; defaults to the efficiency-selected model, or the
    /// most efficient adjacency model when that one is list-based.
    pub model: Option<String>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            levels: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            model: None,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_tasks() -> Vec<Task> {
    vec![Task::Cc]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses all cores. Never affects results.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub dataset: Option<DatasetConfig>,
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub networks: Vec<NetworkConfig>,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub predictor: PredictorParams,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
}

/// A CC candidate: a weighting, optionally derived from a network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelDef {
    pub id: String,
    pub network: Option<String>,
    pub kind: WeightKind,
}

/// Network name used in ids of weightings built without a network.
pub const NO_NETWORK: &str = "none";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative dataset paths resolve against its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(d) = &mut cfg.dataset {
            for p in [Some(&mut d.events), Some(&mut d.groups), d.explicit_edges.as_mut()].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) | (None, None) => return bad("give exactly one of [dataset] or [synthetic]".into()),
            _ => {}
        }
        let mut names = BTreeSet::new();
        for n in &self.networks {
            if n.name.is_empty() || n.name.contains(['/', ',', '"']) || n.name == NO_NETWORK {
                return bad(format!("invalid network name {:?}", n.name));
            }
            if !names.insert(&n.name) {
                return bad(format!("duplicate network name {:?}", n.name));
            }
            n.to_spec()?;
            if n.kind == NetworkKind::Explicit && self.dataset.as_ref().is_none_or(|d| d.explicit_edges.is_none()) {
                return bad(format!("network {} needs dataset.explicit_edges", n.name));
            }
        }
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        if self.tasks.contains(&Task::Lp) && self.networks.is_empty() {
            return bad("link prediction needs at least one network".into());
        }
        if self.tasks.contains(&Task::Cc) && self.models().is_empty() {
            return bad("no collective classification models: add networks or network-free weightings".into());
        }
        let w = &self.weights;
        if !(w.exemplar_fraction > 0.0 && w.exemplar_fraction <= 1.0) || w.exemplar_neighbors == 0 {
            return bad("exemplar_fraction must be in (0, 1] and exemplar_neighbors positive".into());
        }
        let e = &self.evaluation;
        if !e.lambda.is_finite() || e.top == 0 || e.max_labels == Some(0) {
            return bad("lambda must be finite; top and max_labels positive".into());
        }
        if e.labels.iter().collect::<BTreeSet<_>>().len() != e.labels.len() {
            return bad("duplicate label names".into());
        }
        if self.noise.levels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("noise levels must lie in [0, 1]".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if let Some(s) = &self.synthetic {
            if s.node_count == 0 {
                return bad("synthetic.node_count must be positive".into());
            }
        }
        self.eval_settings().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            k_grid: self.evaluation.k_grid.clone(),
            replicates: self.evaluation.replicates,
            predictor: self.predictor,
            codec: self.evaluation.codec,
            pair_feature: self.evaluation.pair_feature,
            seed: self.seed,
        }
    }

    /// CC candidates: network-backed kinds once per network, the rest once.
    pub fn models(&self) -> Vec<ModelDef> {
        let mut out = Vec::new();
        for &kind in &self.weights.kinds {
            if kind.needs_network() {
                for n in &self.networks {
                    out.push(ModelDef {
                        id: format!("{}/{}", n.name, kind),
                        network: Some(n.name.clone()),
                        kind,
                    });
                }
            } else {
                out.push(ModelDef {
                    id: format!("{NO_NETWORK}/{kind}"),
                    network: None,
                    kind,
                });
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Hash of everything that can change results (not `workers` or `out`).
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"
        seed = 3
        tasks = ["cc", "lp"]
        [synthetic]
        node_count = 60
        community_count = 3
        [[networks]]
        name = "knn"
        kind = "knn"
        density = "dense"
        [[networks]]
        name = "th"
        kind = "threshold"
        rho = 200
        [weights]
        kinds = ["cluster", "bfs", "random"]
    "#;

    #[test]
    fn parses_and_enumerates_models() {
        let c = RunConfig::from_toml(SYNTH).unwrap();
        c.validate().unwrap();
        let ids: Vec<String> = c.models().into_iter().map(|m| m.id).collect();
        assert_eq!(ids, ["knn/bfs", "knn/cluster", "none/random", "th/bfs", "th/cluster"]);
        assert_eq!(c.networks[0].to_spec().unwrap().budget, EdgeBudget::Density(0.01));
        assert_eq!(c.networks[1].to_spec().unwrap().kind, NetworkKind::Threshold);
        assert_eq!(c.evaluation.k_grid, DEFAULT_K_GRID);
        assert_eq!(c.evaluation.replicates, 20);
    }

    #[test]
    fn hash_ignores_workers_and_out() {
        let a = RunConfig::from_toml(SYNTH).unwrap();
        let mut b = a.clone();
        b.workers = Some(4);
        b.out = "elsewhere".into();
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 4;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let base = RunConfig::from_toml(SYNTH).unwrap();
        let mut c = base.clone();
        c.synthetic = None;
        assert!(c.validate().unwrap_err().is_config_error());
        let mut c = base.clone();
        c.networks[1].name = "knn".into();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.networks[0].rho = Some(5);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.evaluation.k_grid.clear();
        assert!(c.validate().unwrap_err().is_config_error());
        let mut c = base.clone();
        c.noise.levels = vec![1.5];
        assert!(c.validate().is_err());
        assert!(RunConfig::from_toml("seed = 1\nbogus = 2").unwrap_err().is_config_error());
        assert!(RunConfig::from_toml("[synthetic]\nnode_count = \"x\"").is_err());
    }
}
