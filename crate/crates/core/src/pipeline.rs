//! End-to-end orchestration: corpus loading, cached evaluation, model
//! training, recommendation for new datasets, and the leave-one-out
//! benchmark comparing the graph-embedding pipeline against the
//! distance, CaD, and popularity baselines.
//!
//! Every expensive intermediate is keyed in the artifact store by a
//! hash of all parameters that influence it, so warm reruns recompute
//! nothing and still produce byte-identical reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{cad_vector, distance_vector, meta_features_19, BaselineError};
use crate::config::{ConfigError, RunConfig};
use crate::embed::{deepwalk_features, NodeFeatureMatrix};
use crate::eval::{
    leave_one_out, leave_one_out_popularity, mrr_at_k_series, EvalError, LooReport,
};
use crate::gcn::{embed_all, train as gcn_train, GcnConfig, GcnError, GcnModel, GraphEmbedding, LabeledGraph};
use crate::graph::{build_similarity_graph, pca_reduce, GraphError, SimilarityGraph};
use crate::indices::IndexId;
use crate::ingest::{load_csv, preprocess, IngestError, NumericDataset};
use crate::matio::{MatrixBlock, MatrixCodecError};
use crate::perf::{average_ranking, evaluate_all, EvalOptions, Measure, PerfError, PerformanceTable};
use crate::ranker::{
    assemble_training_set, recommend, train_ranker, RankedRecommendation, RankerError, RankerModel,
};
use crate::seeding::{derive_seed, ConfigHasher};
use crate::stats::{friedman_test, wilcoxon_signed_rank};
use crate::store::{ArtifactKey, ArtifactKind, ArtifactStore, StoreError};
use crate::zoo::AlgorithmId;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Perf(#[from] PerfError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gcn(#[from] GcnError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Matrix(#[from] MatrixCodecError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus directory {0} does not exist or contains no .csv files")]
    EmptyCorpus(PathBuf),
    #[error("benchmark needs at least 3 datasets, found {0}")]
    CorpusTooSmall(usize),
    #[error("missing {kind} model for measure {measure}; run `clustrec train` with the same configuration first")]
    MissingModel { kind: &'static str, measure: String },
}

/// One pipeline run: resolved config, artifact store, worker pool, and
/// the cache-audit execution counter.
pub struct Session {
    config: RunConfig,
    store: ArtifactStore,
    pool: rayon::ThreadPool,
    executions: AtomicU64,
}

/// Per-method outcome of a benchmark mode.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub name: &'static str,
    pub report: LooReport,
}

/// Everything one benchmark mode produced.
#[derive(Debug)]
pub struct ModeBenchmark {
    pub mode: Measure,
    pub methods: Vec<MethodOutcome>,
    pub report_path: PathBuf,
    pub mrr_at_k_path: PathBuf,
}

pub const METHOD_NAMES: [&str; 4] = ["marco_ge", "distance", "cad", "popularity"];

impl Session {
    pub fn new(config: RunConfig) -> Result<Session, PipelineError> {
        config.validate()?;
        let store_dir = config
            .store_dir
            .clone()
            .unwrap_or_else(|| config.output_dir.join("store"));
        let store = ArtifactStore::open(&store_dir)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .expect("worker pool");
        std::fs::create_dir_all(&config.output_dir)?;
        Ok(Session {
            config,
            store,
            pool,
            executions: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    /// Number of algorithm-evaluation cells actually computed (not
    /// served from cache) during this session.
    pub fn executions(&self) -> u64 {
        self.executions.load(Ordering::Relaxed)
    }

    /// Loads and preprocesses every .csv in the corpus directory, in
    /// filename order; writes one provenance record per dataset.
    pub fn load_corpus(&self) -> Result<Vec<NumericDataset>, PipelineError> {
        if !self.config.corpus_dir.is_dir() {
            return Err(PipelineError::EmptyCorpus(self.config.corpus_dir.clone()));
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&self.config.corpus_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(PipelineError::EmptyCorpus(self.config.corpus_dir.clone()));
        }
        let mut datasets = Vec::with_capacity(paths.len());
        let provenance_dir = self.config.output_dir.join("provenance");
        std::fs::create_dir_all(&provenance_dir)?;
        for path in &paths {
            let raw = load_csv(path, None)?;
            let ds = preprocess(&raw)?;
            std::fs::write(
                provenance_dir.join(format!("{}.txt", ds.name)),
                ds.provenance.to_text(),
            )?;
            datasets.push(ds);
        }
        Ok(datasets)
    }

    fn dataset_digest(d: &NumericDataset) -> String {
        let mut h = Sha256::new();
        h.update(d.name.as_bytes());
        h.update([0x1f]);
        h.update(d.n_instances().to_le_bytes());
        h.update(d.n_features().to_le_bytes());
        for v in d.matrix.iter() {
            h.update(v.to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn corpus_fingerprint(datasets: &[NumericDataset]) -> String {
        let mut h = Sha256::new();
        for d in datasets {
            h.update(Self::dataset_digest(d).as_bytes());
            h.update([0x1e]);
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn perf_hash(&self, m: IndexId, fingerprint: &str) -> String {
        let mut h = ConfigHasher::new();
        h.push("measure", m.name())
            .push("corpus", fingerprint)
            .push("repeats", self.config.repeats)
            .push("master_seed", self.config.master_seed)
            .push("k_min", self.config.k_min)
            .push("k_max", self.config.k_max)
            .push(
                "algorithms",
                self.config
                    .algorithms
                    .iter()
                    .map(|a| a.name())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        h.finish()
    }

    /// Per-measure evaluation with store-backed caching.
    pub fn evaluate_measure(
        &self,
        datasets: &[NumericDataset],
        m: IndexId,
    ) -> Result<PerformanceTable, PipelineError> {
        let fingerprint = Self::corpus_fingerprint(datasets);
        let key = ArtifactKey::new(
            ArtifactKind::PerfTable,
            m.name(),
            &self.perf_hash(m, &fingerprint),
        );
        if let Some(bytes) = self.store.get(&key)? {
            let text = String::from_utf8(bytes).map_err(|e| {
                PipelineError::Perf(PerfError::Codec(format!("non-utf8 artifact: {e}")))
            })?;
            return Ok(PerformanceTable::decode(&text)?);
        }
        let opts = EvalOptions {
            repeats: self.config.repeats,
            grid: self.config.grid(),
            master_seed: self.config.master_seed,
        };
        let algorithms = self.config.algorithms.clone();
        let table = self.pool.install(|| {
            evaluate_all(datasets, &algorithms, m, &opts, Some(&self.executions))
        });
        self.store.put(&key, table.encode().as_bytes())?;
        Ok(table)
    }

    /// The per-mode table: a single index's table, or the average-ranking
    /// combination over all ten indices.
    pub fn mode_table(
        &self,
        datasets: &[NumericDataset],
        mode: Measure,
    ) -> Result<PerformanceTable, PipelineError> {
        match mode {
            Measure::Index(m) => self.evaluate_measure(datasets, m),
            Measure::AverageRanking => {
                let tables: Result<Vec<PerformanceTable>, PipelineError> = crate::indices::ALL_INDICES
                    .iter()
                    .map(|&m| self.evaluate_measure(datasets, m))
                    .collect();
                Ok(average_ranking(&tables?)?)
            }
        }
    }

    fn graph_hash(&self, dataset_digest: &str) -> String {
        let mut h = ConfigHasher::new();
        h.push("dataset", dataset_digest)
            .push("pca_enabled", self.config.pca_enabled)
            .push("variance_target", format!("{:?}", self.config.variance_target))
            .push("threshold", format!("{:?}", self.config.graph_threshold));
        h.finish()
    }

    /// PCA + similarity graph for one dataset, cached.
    pub fn build_graph(&self, d: &NumericDataset) -> Result<SimilarityGraph, PipelineError> {
        let key = ArtifactKey::new(
            ArtifactKind::Graph,
            &d.name,
            &self.graph_hash(&Self::dataset_digest(d)),
        );
        if let Some(bytes) = self.store.get(&key)? {
            let text = String::from_utf8(bytes)
                .map_err(|e| PipelineError::Graph(GraphError::Codec(format!("non-utf8: {e}"))))?;
            return Ok(SimilarityGraph::decode(&text)?);
        }
        let reduced = pca_reduce(d, self.config.variance_target, self.config.pca_enabled);
        let graph = build_similarity_graph(&reduced, self.config.graph_threshold);
        self.store.put(&key, graph.encode().as_bytes())?;
        Ok(graph)
    }

    fn features_hash(&self, graph_hash: &str) -> String {
        let mut h = ConfigHasher::new();
        h.push("graph", graph_hash)
            .push("master_seed", self.config.master_seed);
        for (k, v) in self.config.deepwalk.config_entries() {
            h.push(&k, v);
        }
        h.finish()
    }

    /// DeepWalk node features for one dataset's graph, cached.
    pub fn node_features(
        &self,
        d: &NumericDataset,
        graph: &SimilarityGraph,
    ) -> Result<NodeFeatureMatrix, PipelineError> {
        let graph_hash = self.graph_hash(&Self::dataset_digest(d));
        let key = ArtifactKey::new(
            ArtifactKind::NodeFeatures,
            &d.name,
            &self.features_hash(&graph_hash),
        );
        let seed = derive_seed(self.config.master_seed, &["deepwalk", &d.name]);
        if let Some(bytes) = self.store.get(&key)? {
            let block = MatrixBlock::decode(&bytes)?;
            return Ok(NodeFeatureMatrix {
                x: block.to_array(),
                seed,
            });
        }
        let features = self
            .pool
            .install(|| deepwalk_features(graph, &self.config.deepwalk, seed));
        let mut meta = self.config.deepwalk.config_entries();
        meta.push(("seed".into(), seed.to_string()));
        let block = MatrixBlock::from_array(&features.x, meta);
        self.store.put(&key, &block.encode())?;
        Ok(features)
    }

    /// Labeled graphs for the corpus under one table's best-algorithm
    /// labels.
    pub fn labeled_graphs(
        &self,
        datasets: &[NumericDataset],
        table: &PerformanceTable,
    ) -> Result<Vec<LabeledGraph>, PipelineError> {
        let mut graphs = Vec::with_capacity(datasets.len());
        for (i, d) in datasets.iter().enumerate() {
            let graph = self.build_graph(d)?;
            let features = self.node_features(d, &graph)?;
            graphs.push(LabeledGraph::new(
                &d.name,
                graph.adjacency_matrix(),
                features.x,
                table.best[i],
            ));
        }
        Ok(graphs)
    }

    fn gcn_config(&self, mode: Measure) -> GcnConfig {
        GcnConfig {
            layers: self.config.gcn_layers,
            input_dim: self.config.deepwalk.dim,
            embedding_dim: self.config.embedding_size,
            classes: crate::zoo::ALL_ALGORITHMS.len(),
            learning_rate: self.config.gcn_learning_rate,
            max_epochs: self.config.gcn_max_epochs,
            patience: self.config.gcn_patience,
            seed: derive_seed(self.config.master_seed, &["gcn", &mode.name()]),
        }
    }

    fn mode_hash(&self, mode: Measure, table: &PerformanceTable) -> String {
        let mut table_digest = Sha256::new();
        table_digest.update(table.encode().as_bytes());
        let td: String = table_digest.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        let mut h = ConfigHasher::new();
        h.push("mode", mode.name())
            .push("table", td)
            .push("gcn_layers", self.config.gcn_layers)
            .push("embedding_size", self.config.embedding_size)
            .push("gcn_learning_rate", format!("{:?}", self.config.gcn_learning_rate))
            .push("gcn_max_epochs", self.config.gcn_max_epochs)
            .push("gcn_patience", self.config.gcn_patience)
            .push("pca_enabled", self.config.pca_enabled)
            .push("variance_target", format!("{:?}", self.config.variance_target))
            .push("threshold", format!("{:?}", self.config.graph_threshold))
            .push("master_seed", self.config.master_seed);
        for (k, v) in self.config.deepwalk.config_entries() {
            h.push(&k, v);
        }
        h.finish()
    }

    /// Trains (or loads) the graph classifier for one mode and extracts
    /// all corpus embeddings.
    pub fn gcn_for_mode(
        &self,
        datasets: &[NumericDataset],
        mode: Measure,
        table: &PerformanceTable,
    ) -> Result<(GcnModel, Vec<GraphEmbedding>), PipelineError> {
        let hash = self.mode_hash(mode, table);
        let key = ArtifactKey::new(ArtifactKind::GcnnModel, &mode.name(), &hash);
        let graphs = self.labeled_graphs(datasets, table)?;
        let model = if let Some(bytes) = self.store.get(&key)? {
            GcnModel::decode(&bytes)?
        } else {
            let config = self.gcn_config(mode);
            let (model, _history) = self.pool.install(|| gcn_train(&graphs, &config))?;
            self.store.put(&key, &model.encode())?;
            model
        };
        let embeddings = embed_all(&model, &graphs, &mode.name())?;
        // persist per-dataset embeddings for downstream consumers
        for e in &embeddings {
            let ekey = ArtifactKey::new(
                ArtifactKind::Embedding,
                &format!("{}/{}", mode.name(), e.dataset),
                &hash,
            );
            if self.store.get(&ekey)?.is_none() {
                let block = MatrixBlock::from_array(
                    &ndarray::Array2::from_shape_vec((1, e.vector.len()), e.vector.clone())
                        .expect("row vector"),
                    vec![
                        ("dataset".into(), e.dataset.clone()),
                        ("measure".into(), e.measure.clone()),
                    ],
                );
                self.store.put(&ekey, &block.encode())?;
            }
        }
        Ok((model, embeddings))
    }

    /// Trains (or loads) the ranking model for one mode, fit on the full
    /// corpus.
    pub fn ranker_for_mode(
        &self,
        mode: Measure,
        table: &PerformanceTable,
        embeddings: &[GraphEmbedding],
    ) -> Result<RankerModel, PipelineError> {
        let mut hash_in = self.mode_hash(mode, table);
        let mut h = ConfigHasher::new();
        h.push("base", &hash_in)
            .push("trees", self.config.ranker_trees)
            .push("depth", self.config.ranker_depth)
            .push("shrinkage", format!("{:?}", self.config.ranker_shrinkage));
        hash_in = h.finish();
        let key = ArtifactKey::new(ArtifactKind::RankerModel, &mode.name(), &hash_in);
        if let Some(bytes) = self.store.get(&key)? {
            let text = String::from_utf8(bytes)
                .map_err(|e| PipelineError::Ranker(RankerError::Codec(format!("non-utf8: {e}"))))?;
            return Ok(RankerModel::decode(&text)?);
        }
        let instances = assemble_training_set(embeddings, table, &self.config.algorithms)?;
        let model = self
            .pool
            .install(|| train_ranker(&instances, &self.config.ranker_config()))?;
        self.store.put(&key, model.encode().as_bytes())?;
        Ok(model)
    }

    /// `evaluate` command: one performance table per configured mode.
    pub fn cmd_evaluate(&self) -> Result<Vec<PerformanceTable>, PipelineError> {
        let datasets = self.load_corpus()?;
        self.config
            .effective_modes()
            .into_iter()
            .map(|mode| self.mode_table(&datasets, mode))
            .collect()
    }

    /// `train` command: persists the graph classifier and ranking model
    /// per mode.
    pub fn cmd_train(&self) -> Result<Vec<(Measure, GcnModel, RankerModel)>, PipelineError> {
        let datasets = self.load_corpus()?;
        let mut out = Vec::new();
        for mode in self.config.effective_modes() {
            let table = self.mode_table(&datasets, mode)?;
            let (gcn, embeddings) = self.gcn_for_mode(&datasets, mode, &table)?;
            let ranker = self.ranker_for_mode(mode, &table, &embeddings)?;
            out.push((mode, gcn, ranker));
        }
        Ok(out)
    }

    /// `recommend` command: embed a new dataset and rank all configured
    /// algorithms with the trained models.
    pub fn cmd_recommend(
        &self,
        dataset_path: &Path,
        mode: Measure,
    ) -> Result<RankedRecommendation, PipelineError> {
        let datasets = self.load_corpus()?;
        let table = self.mode_table(&datasets, mode)?;
        let hash = self.mode_hash(mode, &table);
        let gcn_key = ArtifactKey::new(ArtifactKind::GcnnModel, &mode.name(), &hash);
        let gcn = match self.store.get(&gcn_key)? {
            Some(bytes) => GcnModel::decode(&bytes)?,
            None => {
                return Err(PipelineError::MissingModel {
                    kind: "graph classifier",
                    measure: mode.name(),
                })
            }
        };
        let mut h = ConfigHasher::new();
        h.push("base", &hash)
            .push("trees", self.config.ranker_trees)
            .push("depth", self.config.ranker_depth)
            .push("shrinkage", format!("{:?}", self.config.ranker_shrinkage));
        let ranker_key = ArtifactKey::new(ArtifactKind::RankerModel, &mode.name(), &h.finish());
        let ranker = match self.store.get(&ranker_key)? {
            Some(bytes) => {
                let text = String::from_utf8(bytes).map_err(|e| {
                    PipelineError::Ranker(RankerError::Codec(format!("non-utf8: {e}")))
                })?;
                RankerModel::decode(&text)?
            }
            None => {
                return Err(PipelineError::MissingModel {
                    kind: "ranking model",
                    measure: mode.name(),
                })
            }
        };

        // full inference path for the unseen dataset
        let raw = load_csv(dataset_path, None)?;
        let ds = preprocess(&raw)?;
        let graph = {
            let reduced = pca_reduce(&ds, self.config.variance_target, self.config.pca_enabled);
            build_similarity_graph(&reduced, self.config.graph_threshold)
        };
        let seed = derive_seed(self.config.master_seed, &["deepwalk", &ds.name]);
        let features = self
            .pool
            .install(|| deepwalk_features(&graph, &self.config.deepwalk, seed));
        let lg = LabeledGraph::new(
            &ds.name,
            graph.adjacency_matrix(),
            features.x,
            self.config.algorithms[0], // label unused at inference
        );
        let embeddings = embed_all(&gcn, &[lg], &mode.name())?;
        let rec = recommend(&ranker, &embeddings[0], &self.config.algorithms)?;

        // persist the printed recommendation
        let mut text = self.report_header(&mode.name());
        text.push_str("rank\talgorithm\tscore\n");
        for (pos, (algo, score)) in rec.ranking.iter().enumerate() {
            let _ = writeln!(text, "{}\t{}\t{score:?}", pos + 1, algo.name());
        }
        std::fs::write(
            self.config
                .output_dir
                .join(format!("recommend_{}_{}.tsv", ds.name, mode.name())),
            text,
        )?;
        Ok(rec)
    }

    fn report_header(&self, mode: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# clustrec report");
        let _ = writeln!(out, "# mode = {mode}");
        for line in self.config.render().lines() {
            let _ = writeln!(out, "# {line}");
        }
        out
    }

    /// Baseline feature vectors (19 meta-features) wrapped as embeddings
    /// so they flow through the identical ranker path.
    fn baseline_features(
        &self,
        datasets: &[NumericDataset],
        kind: &str,
    ) -> Result<Vec<GraphEmbedding>, PipelineError> {
        datasets
            .iter()
            .map(|d| {
                let vector = match kind {
                    "distance" => meta_features_19(&distance_vector(d)?)?.values.to_vec(),
                    "cad" => meta_features_19(&cad_vector(d)?)?.values.to_vec(),
                    other => unreachable!("unknown baseline kind {other}"),
                };
                Ok(GraphEmbedding {
                    dataset: d.name.clone(),
                    measure: kind.to_string(),
                    vector,
                })
            })
            .collect()
    }

    /// Strict leave-one-out for the graph pipeline: the classifier is
    /// retrained for every fold without the held-out dataset's label.
    fn marco_loo_strict(
        &self,
        datasets: &[NumericDataset],
        mode: Measure,
        table: &PerformanceTable,
    ) -> Result<LooReport, PipelineError> {
        use crate::eval::fold_result;
        let graphs = self.labeled_graphs(datasets, table)?;
        let mut folds = Vec::new();
        let mut fold_errors = Vec::new();
        let mut fold_train_digests = Vec::new();
        for (i, test_dataset) in table.datasets.iter().enumerate() {
            let train_graphs: Vec<LabeledGraph> = graphs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, g)| g.clone())
                .collect();
            let config = self.gcn_config(mode);
            let gcn = match self.pool.install(|| gcn_train(&train_graphs, &config)) {
                Ok((m, _)) => m,
                Err(e) => {
                    fold_errors.push((test_dataset.clone(), e.to_string()));
                    continue;
                }
            };
            let embeddings = embed_all(&gcn, &graphs, &mode.name())?;
            let instances = assemble_training_set(&embeddings, table, &self.config.algorithms)?;
            let training: Vec<_> = instances
                .iter()
                .filter(|inst| &inst.group != test_dataset)
                .cloned()
                .collect();
            let ranker = match train_ranker(&training, &self.config.ranker_config()) {
                Ok(m) => m,
                Err(e) => {
                    fold_errors.push((test_dataset.clone(), e.to_string()));
                    continue;
                }
            };
            let rec = recommend(&ranker, &embeddings[i], &self.config.algorithms)?;
            let predicted: Vec<AlgorithmId> = rec.ranking.iter().map(|(a, _)| *a).collect();
            folds.push(fold_result(table, i, predicted)?);
            let mut h = Sha256::new();
            for (j, name) in table.datasets.iter().enumerate() {
                if j != i {
                    h.update(name.as_bytes());
                    h.update([0x1f]);
                }
            }
            fold_train_digests.push(
                h.finalize()[..8]
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect(),
            );
        }
        let mean_src = if folds.is_empty() {
            0.0
        } else {
            folds.iter().map(|f| f.src).sum::<f64>() / folds.len() as f64
        };
        let mrr = crate::eval::mrr(&folds);
        Ok(LooReport {
            folds,
            fold_errors,
            mean_src,
            mrr,
            fold_train_digests,
        })
    }

    /// `benchmark` command: leave-one-out comparison of all four methods
    /// per mode, with significance tests and plot-ready MRR@K series.
    pub fn cmd_benchmark(&self) -> Result<Vec<ModeBenchmark>, PipelineError> {
        let datasets = self.load_corpus()?;
        if datasets.len() < 3 {
            return Err(PipelineError::CorpusTooSmall(datasets.len()));
        }
        let ranker_config = self.config.ranker_config();
        let mut out = Vec::new();
        for mode in self.config.effective_modes() {
            let table = self.mode_table(&datasets, mode)?;

            let marco = if self.config.strict_loo {
                self.marco_loo_strict(&datasets, mode, &table)?
            } else {
                let (_gcn, embeddings) = self.gcn_for_mode(&datasets, mode, &table)?;
                leave_one_out(&embeddings, &table, &ranker_config)?
            };
            let distance_features = self.baseline_features(&datasets, "distance")?;
            let distance = leave_one_out(&distance_features, &table, &ranker_config)?;
            let cad_features = self.baseline_features(&datasets, "cad")?;
            let cad = leave_one_out(&cad_features, &table, &ranker_config)?;
            let popularity = leave_one_out_popularity(&table)?;

            let methods = vec![
                MethodOutcome {
                    name: "marco_ge",
                    report: marco,
                },
                MethodOutcome {
                    name: "distance",
                    report: distance,
                },
                MethodOutcome {
                    name: "cad",
                    report: cad,
                },
                MethodOutcome {
                    name: "popularity",
                    report: popularity,
                },
            ];

            let report_path = self
                .config
                .output_dir
                .join(format!("report_{}.tsv", mode.name()));
            let mrr_at_k_path = self
                .config
                .output_dir
                .join(format!("mrr_at_k_{}.tsv", mode.name()));
            std::fs::write(&report_path, self.render_report(mode, &table, &methods)?)?;
            std::fs::write(&mrr_at_k_path, self.render_mrr_at_k(&table, &methods)?)?;

            out.push(ModeBenchmark {
                mode,
                methods,
                report_path,
                mrr_at_k_path,
            });
        }
        Ok(out)
    }

    fn render_report(
        &self,
        mode: Measure,
        table: &PerformanceTable,
        methods: &[MethodOutcome],
    ) -> Result<String, PipelineError> {
        let mut text = self.report_header(&mode.name());
        let _ = writeln!(text, "# datasets = {}", table.datasets.len());
        let _ = writeln!(
            text,
            "metric\t{}",
            methods
                .iter()
                .map(|m| m.name)
                .collect::<Vec<_>>()
                .join("\t")
        );
        let row = |name: &str, values: Vec<f64>| -> String {
            let mut line = name.to_string();
            for v in values {
                line.push('\t');
                line.push_str(&format!("{v:?}"));
            }
            line.push('\n');
            line
        };
        text.push_str(&row(
            "src",
            methods.iter().map(|m| m.report.mean_src).collect(),
        ));
        text.push_str(&row(
            "mrr",
            methods.iter().map(|m| m.report.mrr).collect(),
        ));
        let _ = writeln!(
            text,
            "folds\t{}",
            methods
                .iter()
                .map(|m| m.report.folds.len().to_string())
                .collect::<Vec<_>>()
                .join("\t")
        );

        // significance: the graph method against each baseline, paired
        // per fold, on both metrics
        let fold_metric = |report: &LooReport, metric: &str| -> Vec<f64> {
            report
                .folds
                .iter()
                .map(|f| match metric {
                    "src" => f.src,
                    _ => f.reciprocal_rank,
                })
                .collect()
        };
        for metric in ["src", "rr"] {
            let marco = fold_metric(&methods[0].report, metric);
            for other in &methods[1..] {
                let baseline = fold_metric(&other.report, metric);
                let line = if marco.len() == baseline.len() {
                    match wilcoxon_signed_rank(&marco, &baseline) {
                        Ok((stat, p)) => format!("{stat:?}\t{p:?}"),
                        Err(e) => format!("NA\tNA\t# {e}"),
                    }
                } else {
                    "NA\tNA\t# fold counts differ".to_string()
                };
                let _ = writeln!(
                    text,
                    "wilcoxon_{}_marco_ge_vs_{}\t{}",
                    metric, other.name, line
                );
            }
        }
        for metric in ["src", "rr"] {
            let rows: Vec<Vec<f64>> = methods
                .iter()
                .map(|m| fold_metric(&m.report, metric))
                .collect();
            let same_len = rows.iter().all(|r| r.len() == rows[0].len());
            let line = if same_len {
                match friedman_test(&rows) {
                    Ok((stat, p)) => format!("{stat:?}\t{p:?}"),
                    Err(e) => format!("NA\tNA\t# {e}"),
                }
            } else {
                "NA\tNA\t# fold counts differ".to_string()
            };
            let _ = writeln!(text, "friedman_{metric}\t{line}");
        }
        Ok(text)
    }

    fn render_mrr_at_k(
        &self,
        table: &PerformanceTable,
        methods: &[MethodOutcome],
    ) -> Result<String, PipelineError> {
        let mut text = String::from("k");
        for m in methods {
            text.push('\t');
            text.push_str(m.name);
        }
        text.push('\n');
        let series: Vec<Vec<(usize, f64)>> = methods
            .iter()
            .map(|m| mrr_at_k_series(&m.report.folds, &table.algorithms))
            .collect::<Result<_, _>>()?;
        for k in 0..table.algorithms.len() {
            let _ = write!(text, "{}", k + 1);
            for s in &series {
                let _ = write!(text, "\t{:?}", s[k].1);
            }
            text.push('\n');
        }
        Ok(text)
    }
}
