//! Run configuration: a flat key-value text file plus command-line
//! overrides, validated against the documented ranges.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embed::DeepWalkParams;
use crate::indices::{IndexId, ALL_INDICES};
use crate::perf::Measure;
use crate::ranker::RankerConfig;
use crate::zoo::{AlgorithmId, HyperparamGrid, ALL_ALGORITHMS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {0} is not `key = value`")]
    BadLine(usize),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {detail}")]
    BadValue { key: String, detail: String },
    #[error("{0}")]
    Invalid(String),
}

/// Embedding sizes accepted for the graph embedding.
pub const ALLOWED_EMBEDDING_SIZES: [usize; 6] = [50, 100, 200, 300, 400, 500];

/// Fully resolved run configuration. Every field is settable from the
/// config file and overridable from the command line.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub store_dir: Option<PathBuf>,
    /// Measures to evaluate; empty means all ten indices.
    pub measures: Vec<IndexId>,
    /// Additionally build the average-ranking combination model.
    pub average_ranking: bool,
    pub algorithms: Vec<AlgorithmId>,
    pub pca_enabled: bool,
    pub variance_target: f64,
    pub graph_threshold: f64,
    pub deepwalk: DeepWalkParams,
    pub gcn_layers: usize,
    pub embedding_size: usize,
    pub gcn_learning_rate: f64,
    pub gcn_max_epochs: usize,
    pub gcn_patience: usize,
    pub ranker_trees: usize,
    pub ranker_depth: usize,
    pub ranker_shrinkage: f64,
    pub repeats: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub master_seed: u64,
    pub jobs: usize,
    /// Retrain the graph classifier per fold, excluding the held-out
    /// dataset's label, for leakage-audited runs.
    pub strict_loo: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_dir: PathBuf::from("corpus"),
            output_dir: PathBuf::from("out"),
            store_dir: None,
            measures: Vec::new(),
            average_ranking: false,
            algorithms: ALL_ALGORITHMS.to_vec(),
            pca_enabled: true,
            variance_target: 0.90,
            graph_threshold: 0.9,
            deepwalk: DeepWalkParams::default(),
            gcn_layers: 4,
            embedding_size: 300,
            gcn_learning_rate: 0.006,
            gcn_max_epochs: 60,
            gcn_patience: 10,
            ranker_trees: 200,
            ranker_depth: 4,
            ranker_shrinkage: 0.1,
            repeats: 10,
            k_min: 2,
            k_max: 25,
            master_seed: 0,
            jobs: 0,
            strict_loo: false,
        }
    }
}

impl RunConfig {
    /// Parses a flat `key = value` file ('#' starts a comment).
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::BadLine(lineno + 1))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key; command-line overrides route through here too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |key: &str, detail: String| ConfigError::BadValue {
            key: key.to_string(),
            detail,
        };
        macro_rules! parse {
            ($t:ty) => {
                value
                    .parse::<$t>()
                    .map_err(|e| bad(key, e.to_string()))?
            };
        }
        match key {
            "corpus_dir" => self.corpus_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "store_dir" => self.store_dir = Some(PathBuf::from(value)),
            "measures" => {
                if value == "all" {
                    self.measures = Vec::new();
                } else {
                    let mut measures = Vec::new();
                    for name in value.split(',').filter(|s| !s.is_empty()) {
                        let m = IndexId::from_name(name.trim())
                            .ok_or_else(|| bad(key, format!("unknown measure {name:?}")))?;
                        measures.push(m);
                    }
                    self.measures = measures;
                }
            }
            "average_ranking" => self.average_ranking = parse!(bool),
            "algorithms" => {
                if value == "all" {
                    self.algorithms = ALL_ALGORITHMS.to_vec();
                } else {
                    let mut algos = Vec::new();
                    for name in value.split(',').filter(|s| !s.is_empty()) {
                        let a = AlgorithmId::from_name(name.trim())
                            .ok_or_else(|| bad(key, format!("unknown algorithm {name:?}")))?;
                        algos.push(a);
                    }
                    self.algorithms = algos;
                }
            }
            "pca_enabled" => self.pca_enabled = parse!(bool),
            "variance_target" => self.variance_target = parse!(f64),
            "graph_threshold" => self.graph_threshold = parse!(f64),
            "deepwalk_num_walks" => self.deepwalk.num_walks = parse!(usize),
            "deepwalk_walk_length" => self.deepwalk.walk_length = parse!(usize),
            "deepwalk_dim" => self.deepwalk.dim = parse!(usize),
            "deepwalk_window" => self.deepwalk.window = parse!(usize),
            "deepwalk_negatives" => self.deepwalk.negatives = parse!(usize),
            "deepwalk_epochs" => self.deepwalk.epochs = parse!(usize),
            "deepwalk_learning_rate" => self.deepwalk.learning_rate = parse!(f64),
            "gcn_layers" => self.gcn_layers = parse!(usize),
            "embedding_size" => self.embedding_size = parse!(usize),
            "gcn_learning_rate" => self.gcn_learning_rate = parse!(f64),
            "gcn_max_epochs" => self.gcn_max_epochs = parse!(usize),
            "gcn_patience" => self.gcn_patience = parse!(usize),
            "ranker_trees" => self.ranker_trees = parse!(usize),
            "ranker_depth" => self.ranker_depth = parse!(usize),
            "ranker_shrinkage" => self.ranker_shrinkage = parse!(f64),
            "repeats" => self.repeats = parse!(usize),
            "k_min" => self.k_min = parse!(usize),
            "k_max" => self.k_max = parse!(usize),
            "master_seed" => self.master_seed = parse!(u64),
            "jobs" => self.jobs = parse!(usize),
            "strict_loo" => self.strict_loo = parse!(bool),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if !(self.graph_threshold > 0.0 && self.graph_threshold < 1.0) {
            return fail(format!(
                "graph_threshold {} outside (0, 1)",
                self.graph_threshold
            ));
        }
        if !(2..=6).contains(&self.gcn_layers) {
            return fail(format!("gcn_layers {} outside 2..6", self.gcn_layers));
        }
        if !ALLOWED_EMBEDDING_SIZES.contains(&self.embedding_size) {
            return fail(format!(
                "embedding_size {} not in {:?}",
                self.embedding_size, ALLOWED_EMBEDDING_SIZES
            ));
        }
        if !(self.variance_target > 0.0 && self.variance_target <= 1.0) {
            return fail(format!(
                "variance_target {} outside (0, 1]",
                self.variance_target
            ));
        }
        if self.repeats < 1 {
            return fail("repeats must be >= 1".to_string());
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return fail(format!("k range {}..{} invalid", self.k_min, self.k_max));
        }
        if self.algorithms.is_empty() {
            return fail("algorithm list is empty".to_string());
        }
        if self.gcn_learning_rate <= 0.0 || self.ranker_shrinkage <= 0.0 {
            return fail("learning rates must be positive".to_string());
        }
        Ok(())
    }

    /// The measures a run evaluates: the configured subset, or all ten.
    pub fn effective_measures(&self) -> Vec<IndexId> {
        if self.measures.is_empty() {
            ALL_INDICES.to_vec()
        } else {
            self.measures.clone()
        }
    }

    /// Measures plus the average-ranking mode when enabled.
    pub fn effective_modes(&self) -> Vec<Measure> {
        let mut modes: Vec<Measure> = self
            .effective_measures()
            .into_iter()
            .map(Measure::Index)
            .collect();
        if self.average_ranking {
            modes.push(Measure::AverageRanking);
        }
        modes
    }

    pub fn grid(&self) -> HyperparamGrid {
        HyperparamGrid {
            k_min: self.k_min,
            k_max: self.k_max,
            ..HyperparamGrid::default()
        }
    }

    pub fn ranker_config(&self) -> RankerConfig {
        RankerConfig {
            trees: self.ranker_trees,
            depth: self.ranker_depth,
            shrinkage: self.ranker_shrinkage,
            seed: self.master_seed,
        }
    }

    /// Canonical `key = value` rendering of the resolved config; embedded
    /// in every report header for reproducibility.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("corpus_dir", self.corpus_dir.display().to_string());
        push("output_dir", self.output_dir.display().to_string());
        if let Some(dir) = &self.store_dir {
            push("store_dir", dir.display().to_string());
        }
        push(
            "measures",
            if self.measures.is_empty() {
                "all".to_string()
            } else {
                self.measures
                    .iter()
                    .map(|m| m.name())
                    .collect::<Vec<_>>()
                    .join(",")
            },
        );
        push("average_ranking", self.average_ranking.to_string());
        push(
            "algorithms",
            self.algorithms
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        push("pca_enabled", self.pca_enabled.to_string());
        push("variance_target", format!("{:?}", self.variance_target));
        push("graph_threshold", format!("{:?}", self.graph_threshold));
        push("deepwalk_num_walks", self.deepwalk.num_walks.to_string());
        push("deepwalk_walk_length", self.deepwalk.walk_length.to_string());
        push("deepwalk_dim", self.deepwalk.dim.to_string());
        push("deepwalk_window", self.deepwalk.window.to_string());
        push("deepwalk_negatives", self.deepwalk.negatives.to_string());
        push("deepwalk_epochs", self.deepwalk.epochs.to_string());
        push(
            "deepwalk_learning_rate",
            format!("{:?}", self.deepwalk.learning_rate),
        );
        push("gcn_layers", self.gcn_layers.to_string());
        push("embedding_size", self.embedding_size.to_string());
        push("gcn_learning_rate", format!("{:?}", self.gcn_learning_rate));
        push("gcn_max_epochs", self.gcn_max_epochs.to_string());
        push("gcn_patience", self.gcn_patience.to_string());
        push("ranker_trees", self.ranker_trees.to_string());
        push("ranker_depth", self.ranker_depth.to_string());
        push("ranker_shrinkage", format!("{:?}", self.ranker_shrinkage));
        push("repeats", self.repeats.to_string());
        push("k_min", self.k_min.to_string());
        push("k_max", self.k_max.to_string());
        push("master_seed", self.master_seed.to_string());
        push("jobs", self.jobs.to_string());
        push("strict_loo", self.strict_loo.to_string());
        out
    }
}
