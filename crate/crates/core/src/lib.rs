//! clustrec: meta-learning for clustering algorithm selection.
//!
//! Given a corpus of tabular datasets and an internal clustering quality
//! measure, this crate learns to recommend a ranked list of clustering
//! algorithms for previously unseen datasets. Each dataset is converted
//! into a cosine-similarity graph over its instances, embedded with a
//! supervised graph convolutional network, and a pairwise ranking model
//! is trained on the embeddings against the observed algorithm rankings.
//!
//! The pipeline, end to end:
//!
//! 1. [`ingest`] loads CSV datasets and normalizes them to clean numeric
//!    matrices.
//! 2. [`zoo`] runs the candidate clustering algorithms, [`indices`] scores
//!    their solutions, and [`perf`] aggregates scores into performance
//!    tables with per-dataset rankings and best-algorithm labels.
//! 3. [`graph`] PCA-reduces each dataset and builds its similarity graph;
//!    [`embed`] produces node features via weighted random walks and
//!    skip-gram training; [`gcn`] trains the supervised graph classifier
//!    and extracts per-dataset graph embeddings.
//! 4. [`ranker`] trains a gradient-boosted pairwise ranking model on the
//!    embeddings and produces ranked recommendations.
//!
//! [`baselines`] provides the popularity, distance-feature, and
//! correlation-and-distance comparison systems, [`eval`] the ranking
//! metrics, leave-one-out harness, and significance tests, [`store`] the
//! content-addressed artifact cache, and [`pipeline`] the orchestration
//! used by the `clustrec` CLI.

pub mod baselines;
pub mod config;
pub mod embed;
pub mod eval;
pub mod gcn;
pub mod graph;
pub mod indices;
pub mod ingest;
pub mod linalg;
pub mod matio;
pub mod perf;
pub mod pipeline;
pub mod ranker;
pub mod seeding;
pub mod stats;
pub mod store;
pub mod synth;
pub mod zoo;
