//! clustrec: recommend clustering algorithms for tabular datasets.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clustrec_core::config::RunConfig;
use clustrec_core::perf::Measure;
use clustrec_core::pipeline::{PipelineError, Session};

#[derive(Parser)]
#[command(
    name = "clustrec",
    version,
    about = "Meta-learning toolkit that recommends clustering algorithms for tabular datasets"
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key (repeatable): --set key=value. Command
    /// line wins over the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Corpus directory of .csv datasets.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Output directory for reports and provenance.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Artifact store root (also settable via CLUSTREC_STORE).
    #[arg(long, global = true)]
    store: Option<PathBuf>,

    /// Comma-separated measures, or "all".
    #[arg(long, global = true)]
    measures: Option<String>,

    /// Comma-separated algorithm subset, or "all".
    #[arg(long, global = true)]
    algorithms: Option<String>,

    /// Master seed for every stochastic component.
    #[arg(long, global = true)]
    master_seed: Option<u64>,

    /// Worker pool size; 0 means all logical cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Disable the PCA reduction (ablation).
    #[arg(long, global = true)]
    no_pca: bool,

    /// Graph convolution depth (2..6).
    #[arg(long, global = true)]
    layers: Option<usize>,

    /// Graph embedding size (50, 100, 200, 300, 400, 500).
    #[arg(long, global = true)]
    emb: Option<usize>,

    /// Also build the average-ranking combination model.
    #[arg(long, global = true)]
    average_ranking: bool,

    /// Retrain the graph classifier per fold for leakage-audited runs.
    #[arg(long, global = true)]
    strict_loo: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every (dataset, algorithm) pair and persist the
    /// performance tables.
    Evaluate,
    /// Train the graph classifier and ranking model per measure.
    Train,
    /// Rank all configured algorithms for a new dataset.
    Recommend {
        /// Path to the new dataset (.csv).
        dataset: PathBuf,
        /// Measure to optimize (index name or "average-ranking").
        #[arg(long, default_value = "average-ranking")]
        measure: String,
    },
    /// Leave-one-out comparison of the pipeline against the distance,
    /// CaD, and popularity baselines, with significance tests.
    Benchmark,
    /// Artifact store maintenance.
    Store {
        #[command(subcommand)]
        action: StoreAction,
    },
}

#[derive(Subcommand)]
enum StoreAction {
    /// List stored artifact keys.
    Ls,
    /// Remove all artifacts under a key prefix (empty removes all).
    Rm {
        #[arg(default_value = "")]
        prefix: String,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, clustrec_core::config::ConfigError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Ok(store) = std::env::var("CLUSTREC_STORE") {
        if !store.is_empty() {
            config.set("store_dir", &store)?;
        }
    }
    if let Some(dir) = &cli.corpus {
        config.corpus_dir = dir.clone();
    }
    if let Some(dir) = &cli.output {
        config.output_dir = dir.clone();
    }
    if let Some(dir) = &cli.store {
        config.store_dir = Some(dir.clone());
    }
    if let Some(measures) = &cli.measures {
        config.set("measures", measures)?;
    }
    if let Some(algorithms) = &cli.algorithms {
        config.set("algorithms", algorithms)?;
    }
    if let Some(seed) = cli.master_seed {
        config.master_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if cli.no_pca {
        config.pca_enabled = false;
    }
    if let Some(layers) = cli.layers {
        config.gcn_layers = layers;
    }
    if let Some(emb) = cli.emb {
        config.embedding_size = emb;
    }
    if cli.average_ranking {
        config.average_ranking = true;
    }
    if cli.strict_loo {
        config.strict_loo = true;
    }
    for pair in &cli.sets {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            clustrec_core::config::ConfigError::Invalid(format!(
                "--set {pair:?} is not key=value"
            ))
        })?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn exit_code_for(err: &PipelineError) -> u8 {
    match err {
        PipelineError::Config(_) => 1,
        PipelineError::Ingest(_)
        | PipelineError::EmptyCorpus(_)
        | PipelineError::CorpusTooSmall(_)
        | PipelineError::MissingModel { .. } => 2,
        _ => 3,
    }
}

fn run(cli: &Cli, session: &Session) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Evaluate => {
            let tables = session.cmd_evaluate()?;
            for table in &tables {
                println!(
                    "{}: {} algorithms x {} datasets, {} cell errors",
                    table.measure.name(),
                    table.algorithms.len(),
                    table.datasets.len(),
                    table.cell_errors.len()
                );
                for (algo, dataset, msg) in &table.cell_errors {
                    eprintln!("  error: {} on {}: {}", algo.name(), dataset, msg);
                }
            }
            println!("store: {}", session.store().root().display());
        }
        Command::Train => {
            let trained = session.cmd_train()?;
            for (mode, _gcn, ranker) in &trained {
                println!(
                    "{}: graph classifier ({} layers, emb {}) + ranking model ({} trees, hash {})",
                    mode.name(),
                    session.config().gcn_layers,
                    session.config().embedding_size,
                    ranker.trees.len(),
                    ranker.config_hash
                );
            }
        }
        Command::Recommend { dataset, measure } => {
            let mode = Measure::from_name(measure).ok_or_else(|| {
                PipelineError::Config(clustrec_core::config::ConfigError::BadValue {
                    key: "measure".into(),
                    detail: format!("unknown measure {measure:?}"),
                })
            })?;
            let rec = session.cmd_recommend(dataset, mode)?;
            println!("rank\talgorithm\tscore");
            for (pos, (algo, score)) in rec.ranking.iter().enumerate() {
                println!("{}\t{}\t{score:.6}", pos + 1, algo.name());
            }
        }
        Command::Benchmark => {
            let modes = session.cmd_benchmark()?;
            for mode in &modes {
                println!("mode {}:", mode.mode.name());
                for method in &mode.methods {
                    println!(
                        "  {:<12} src {:+.4}  mrr {:.4}  ({} folds)",
                        method.name,
                        method.report.mean_src,
                        method.report.mrr,
                        method.report.folds.len()
                    );
                }
                println!("  report: {}", mode.report_path.display());
                println!("  mrr@k:  {}", mode.mrr_at_k_path.display());
            }
        }
        Command::Store { action } => match action {
            StoreAction::Ls => {
                for key in session.store().list()? {
                    println!("{key}");
                }
            }
            StoreAction::Rm { prefix } => {
                let removed = session.store().invalidate(prefix)?;
                println!("removed {removed} artifacts");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    // default SIGPIPE so `clustrec store ls | head` terminates quietly
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version print and exit cleanly
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };
    let session = match Session::new(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    match run(&cli, &session) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
