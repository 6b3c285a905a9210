//! Performance tables: evaluating every (dataset, algorithm) pair under a
//! measure, fractional ranking, best-algorithm labels, and the
//! average-ranking combination across measures.

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;
use thiserror::Error;

use crate::indices::{orientation, IndexId, Orientation};
use crate::ingest::NumericDataset;
use crate::zoo::{tune_k, AlgorithmId, HyperparamGrid, ZooError};

/// What a performance table was scored with: a single internal index, or
/// the mean-rank combination over several indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Index(IndexId),
    AverageRanking,
}

impl Measure {
    pub fn name(self) -> String {
        match self {
            Measure::Index(m) => m.name().to_string(),
            Measure::AverageRanking => "average-ranking".to_string(),
        }
    }

    pub fn from_name(name: &str) -> Option<Measure> {
        if name == "average-ranking" {
            return Some(Measure::AverageRanking);
        }
        IndexId::from_name(name).map(Measure::Index)
    }
}

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("tables do not share datasets and algorithms")]
    MismatchedAxes,
    #[error("average ranking needs at least 2 tables, got {0}")]
    TooFewTables(usize),
    #[error("malformed performance table: {0}")]
    Codec(String),
}

/// Scores, fractional ranks, and best-algorithm labels for a corpus
/// under one measure. Scores are indexed `[algorithm][dataset]`; a `None`
/// score means the measure was undefined (or every configuration failed)
/// for that cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceTable {
    pub measure: Measure,
    pub algorithms: Vec<AlgorithmId>,
    pub datasets: Vec<String>,
    pub scores: Vec<Vec<Option<f64>>>,
    /// Fractional ranks per `[algorithm][dataset]`; 1 is best. Undefined
    /// scores rank behind every defined one, ordered among themselves by
    /// algorithm ordinal.
    pub ranks: Vec<Vec<f64>>,
    pub best: Vec<AlgorithmId>,
    pub repeats: usize,
    pub master_seed: u64,
    /// Per-cell tuning failures, as (algorithm, dataset, message).
    pub cell_errors: Vec<(AlgorithmId, String, String)>,
}

/// Options shared by every cell evaluation.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub repeats: usize,
    pub grid: HyperparamGrid,
    pub master_seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            repeats: 10,
            grid: HyperparamGrid::default(),
            master_seed: 0,
        }
    }
}

/// Evaluates every (dataset, algorithm) combination under measure `m`.
///
/// Each cell runs the exhaustive grid search of [`tune_k`]; its score is
/// the winning grid point's mean over the seeded repeats. A failing cell
/// is recorded and ranked last, never fatal. Cells are evaluated in
/// parallel and reduced in (algorithm, dataset) order, so the table is
/// bit-reproducible for a fixed master seed.
///
/// `executions`, when provided, is incremented once per actually
/// evaluated cell; a warm cache upstream keeps it untouched.
pub fn evaluate_all(
    datasets: &[NumericDataset],
    algorithms: &[AlgorithmId],
    m: IndexId,
    opts: &EvalOptions,
    executions: Option<&AtomicU64>,
) -> PerformanceTable {
    let cells: Vec<(usize, usize)> = (0..algorithms.len())
        .flat_map(|a| (0..datasets.len()).map(move |d| (a, d)))
        .collect();

    let results: Vec<Result<f64, ZooError>> = cells
        .par_iter()
        .map(|&(a, d)| {
            if let Some(counter) = executions {
                counter.fetch_add(1, AtomicOrdering::Relaxed);
            }
            tune_k(
                &datasets[d],
                algorithms[a],
                m,
                &opts.grid,
                opts.repeats,
                opts.master_seed,
            )
            .map(|tuned| tuned.score)
        })
        .collect();

    let mut scores = vec![vec![None; datasets.len()]; algorithms.len()];
    let mut cell_errors = Vec::new();
    for (&(a, d), result) in cells.iter().zip(results) {
        match result {
            Ok(score) => scores[a][d] = Some(score),
            Err(e) => cell_errors.push((algorithms[a], datasets[d].name.clone(), e.to_string())),
        }
    }

    let dataset_names: Vec<String> = datasets.iter().map(|d| d.name.clone()).collect();
    let (ranks, best) = rank_table(&scores, algorithms, orientation(m));
    PerformanceTable {
        measure: Measure::Index(m),
        algorithms: algorithms.to_vec(),
        datasets: dataset_names,
        scores,
        ranks,
        best,
        repeats: opts.repeats,
        master_seed: opts.master_seed,
        cell_errors,
    }
}

/// Ranks each dataset column: fractional (average) ranks on ties among
/// defined scores, undefined cells ranked last by ordinal. Returns the
/// rank matrix and the per-dataset best algorithm (rank 1; ties resolve
/// to the smaller ordinal).
fn rank_table(
    scores: &[Vec<Option<f64>>],
    algorithms: &[AlgorithmId],
    orient: Orientation,
) -> (Vec<Vec<f64>>, Vec<AlgorithmId>) {
    let n_algos = scores.len();
    let n_datasets = if n_algos == 0 { 0 } else { scores[0].len() };
    let mut ranks = vec![vec![0.0; n_datasets]; n_algos];
    let mut best = Vec::with_capacity(n_datasets);

    for d in 0..n_datasets {
        let column: Vec<Option<f64>> = (0..n_algos).map(|a| scores[a][d]).collect();
        let col_ranks = rank_column(&column, orient);
        for a in 0..n_algos {
            ranks[a][d] = col_ranks[a];
        }
        let best_a = (0..n_algos)
            .min_by(|&x, &y| {
                col_ranks[x]
                    .partial_cmp(&col_ranks[y])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(algorithms[x].ordinal().cmp(&algorithms[y].ordinal()))
            })
            .expect("at least one algorithm");
        best.push(algorithms[best_a]);
    }
    (ranks, best)
}

/// Fractional ranking of a single score column under an orientation.
pub fn rank_column(scores: &[Option<f64>], orient: Orientation) -> Vec<f64> {
    let n = scores.len();
    let defined: Vec<usize> = (0..n).filter(|&i| scores[i].is_some()).collect();
    let undefined: Vec<usize> = (0..n).filter(|&i| scores[i].is_none()).collect();

    let mut order = defined.clone();
    order.sort_by(|&i, &j| {
        let a = scores[i].expect("defined");
        let b = scores[j].expect("defined");
        let cmp = match orient {
            Orientation::Maximize => b.partial_cmp(&a),
            Orientation::Minimize => a.partial_cmp(&b),
        };
        cmp.unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });

    let mut ranks = vec![0.0; n];
    let mut pos = 0usize;
    while pos < order.len() {
        // group ties and assign the average position
        let value = scores[order[pos]].expect("defined");
        let mut end = pos;
        while end < order.len() && scores[order[end]].expect("defined") == value {
            end += 1;
        }
        let avg = ((pos + 1) + end) as f64 / 2.0;
        for &i in &order[pos..end] {
            ranks[i] = avg;
        }
        pos = end;
    }
    // undefined cells rank behind all defined ones, by index order
    for (offset, &i) in undefined.iter().enumerate() {
        ranks[i] = (defined.len() + offset + 1) as f64;
    }
    ranks
}

/// Combines one table per index into the average-ranking table: the mean
/// rank per (algorithm, dataset) becomes the score, re-ranked per dataset
/// so the lowest mean rank holds position 1.
pub fn average_ranking(tables: &[PerformanceTable]) -> Result<PerformanceTable, PerfError> {
    if tables.len() < 2 {
        return Err(PerfError::TooFewTables(tables.len()));
    }
    let first = &tables[0];
    for t in &tables[1..] {
        if t.algorithms != first.algorithms || t.datasets != first.datasets {
            return Err(PerfError::MismatchedAxes);
        }
    }

    let n_algos = first.algorithms.len();
    let n_datasets = first.datasets.len();
    let mut mean_ranks = vec![vec![None; n_datasets]; n_algos];
    for (a, row) in mean_ranks.iter_mut().enumerate() {
        for (d, cell) in row.iter_mut().enumerate() {
            let sum: f64 = tables.iter().map(|t| t.ranks[a][d]).sum();
            *cell = Some(sum / tables.len() as f64);
        }
    }

    let (ranks, best) = rank_table(&mean_ranks, &first.algorithms, Orientation::Minimize);
    Ok(PerformanceTable {
        measure: Measure::AverageRanking,
        algorithms: first.algorithms.clone(),
        datasets: first.datasets.clone(),
        scores: mean_ranks,
        ranks,
        best,
        repeats: first.repeats,
        master_seed: first.master_seed,
        cell_errors: Vec::new(),
    })
}

/// The labeled pairs (dataset, best algorithm) in corpus order.
pub fn label_pairs(t: &PerformanceTable) -> Vec<(String, AlgorithmId)> {
    t.datasets
        .iter()
        .cloned()
        .zip(t.best.iter().copied())
        .collect()
}

impl PerformanceTable {
    /// Serializes to the delimiter-separated text contract: a metadata
    /// header, score and rank rows per algorithm, and best labels.
    /// Floats use shortest round-trip formatting, so decode is exact.
    pub fn encode(&self) -> String {
        let mut out = String::from("clustrec-perf v1\n");
        out.push_str(&format!("measure={}\n", self.measure.name()));
        out.push_str(&format!("repeats={}\n", self.repeats));
        out.push_str(&format!("master_seed={}\n", self.master_seed));
        out.push_str(&format!(
            "algorithms={}\n",
            self.algorithms
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str(&format!("datasets={}\n", self.datasets.join(",")));
        for (a, algo) in self.algorithms.iter().enumerate() {
            out.push_str(&format!("P\t{}", algo.name()));
            for d in 0..self.datasets.len() {
                match self.scores[a][d] {
                    Some(v) => out.push_str(&format!("\t{v:?}")),
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        for (a, algo) in self.algorithms.iter().enumerate() {
            out.push_str(&format!("R\t{}", algo.name()));
            for d in 0..self.datasets.len() {
                out.push_str(&format!("\t{:?}", self.ranks[a][d]));
            }
            out.push('\n');
        }
        for (d, name) in self.datasets.iter().enumerate() {
            out.push_str(&format!("BEST\t{}\t{}\n", name, self.best[d].name()));
        }
        for (algo, dataset, msg) in &self.cell_errors {
            out.push_str(&format!("ERR\t{}\t{}\t{}\n", algo.name(), dataset, msg));
        }
        out
    }

    /// Parses the text format produced by [`PerformanceTable::encode`].
    pub fn decode(text: &str) -> Result<PerformanceTable, PerfError> {
        let bad = |m: &str| PerfError::Codec(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("clustrec-perf v1") {
            return Err(bad("missing magic line"));
        }

        let mut measure = None;
        let mut repeats = None;
        let mut master_seed = None;
        let mut algorithms: Vec<AlgorithmId> = Vec::new();
        let mut datasets: Vec<String> = Vec::new();
        let mut p_rows: Vec<(AlgorithmId, Vec<Option<f64>>)> = Vec::new();
        let mut r_rows: Vec<(AlgorithmId, Vec<f64>)> = Vec::new();
        let mut best_rows: Vec<(String, AlgorithmId)> = Vec::new();
        let mut cell_errors = Vec::new();

        for line in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("measure=") {
                measure = Some(Measure::from_name(rest).ok_or_else(|| bad("unknown measure"))?);
            } else if let Some(rest) = line.strip_prefix("repeats=") {
                repeats = Some(rest.parse::<usize>().map_err(|_| bad("bad repeats"))?);
            } else if let Some(rest) = line.strip_prefix("master_seed=") {
                master_seed = Some(rest.parse::<u64>().map_err(|_| bad("bad master_seed"))?);
            } else if let Some(rest) = line.strip_prefix("algorithms=") {
                for name in rest.split(',').filter(|s| !s.is_empty()) {
                    algorithms.push(
                        AlgorithmId::from_name(name).ok_or_else(|| bad("unknown algorithm"))?,
                    );
                }
            } else if let Some(rest) = line.strip_prefix("datasets=") {
                datasets = rest
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.to_string())
                    .collect();
            } else if let Some(rest) = line.strip_prefix("P\t") {
                let mut fields = rest.split('\t');
                let name = fields.next().ok_or_else(|| bad("P row missing name"))?;
                let algo = AlgorithmId::from_name(name).ok_or_else(|| bad("unknown algorithm"))?;
                let values: Result<Vec<Option<f64>>, PerfError> = fields
                    .map(|f| {
                        if f == "NA" {
                            Ok(None)
                        } else {
                            f.parse::<f64>().map(Some).map_err(|_| bad("bad score"))
                        }
                    })
                    .collect();
                p_rows.push((algo, values?));
            } else if let Some(rest) = line.strip_prefix("R\t") {
                let mut fields = rest.split('\t');
                let name = fields.next().ok_or_else(|| bad("R row missing name"))?;
                let algo = AlgorithmId::from_name(name).ok_or_else(|| bad("unknown algorithm"))?;
                let values: Result<Vec<f64>, PerfError> = fields
                    .map(|f| f.parse::<f64>().map_err(|_| bad("bad rank")))
                    .collect();
                r_rows.push((algo, values?));
            } else if let Some(rest) = line.strip_prefix("BEST\t") {
                let mut fields = rest.split('\t');
                let dataset = fields.next().ok_or_else(|| bad("BEST missing dataset"))?;
                let name = fields.next().ok_or_else(|| bad("BEST missing algorithm"))?;
                let algo = AlgorithmId::from_name(name).ok_or_else(|| bad("unknown algorithm"))?;
                best_rows.push((dataset.to_string(), algo));
            } else if let Some(rest) = line.strip_prefix("ERR\t") {
                let mut fields = rest.split('\t');
                let name = fields.next().ok_or_else(|| bad("ERR missing algorithm"))?;
                let algo = AlgorithmId::from_name(name).ok_or_else(|| bad("unknown algorithm"))?;
                let dataset = fields.next().ok_or_else(|| bad("ERR missing dataset"))?;
                let msg = fields.collect::<Vec<_>>().join("\t");
                cell_errors.push((algo, dataset.to_string(), msg));
            } else {
                return Err(bad("unrecognized line"));
            }
        }

        let measure = measure.ok_or_else(|| bad("missing measure"))?;
        let repeats = repeats.ok_or_else(|| bad("missing repeats"))?;
        let master_seed = master_seed.ok_or_else(|| bad("missing master_seed"))?;
        if algorithms.is_empty() || datasets.is_empty() {
            return Err(bad("empty axes"));
        }
        if p_rows.len() != algorithms.len()
            || r_rows.len() != algorithms.len()
            || best_rows.len() != datasets.len()
        {
            return Err(bad("row count mismatch"));
        }

        let mut scores = vec![vec![None; datasets.len()]; algorithms.len()];
        let mut ranks = vec![vec![0.0; datasets.len()]; algorithms.len()];
        for (algo, values) in p_rows {
            let a = algorithms
                .iter()
                .position(|x| *x == algo)
                .ok_or_else(|| bad("P row for unlisted algorithm"))?;
            if values.len() != datasets.len() {
                return Err(bad("P row width mismatch"));
            }
            scores[a] = values;
        }
        for (algo, values) in r_rows {
            let a = algorithms
                .iter()
                .position(|x| *x == algo)
                .ok_or_else(|| bad("R row for unlisted algorithm"))?;
            if values.len() != datasets.len() {
                return Err(bad("R row width mismatch"));
            }
            ranks[a] = values;
        }
        let mut best = Vec::with_capacity(datasets.len());
        for name in &datasets {
            let algo = best_rows
                .iter()
                .find(|(d, _)| d == name)
                .map(|(_, a)| *a)
                .ok_or_else(|| bad("missing BEST row"))?;
            best.push(algo);
        }

        Ok(PerformanceTable {
            measure,
            algorithms,
            datasets,
            scores,
            ranks,
            best,
            repeats,
            master_seed,
            cell_errors,
        })
    }
}
