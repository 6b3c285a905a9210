//! The candidate clustering algorithms and per-dataset hyperparameter
//! tuning.
//!
//! Fifteen algorithms are shipped: minimum-spanning-tree clustering,
//! single/average/complete/Ward agglomerative linkage, K-means,
//! K-harmonic means, kernel K-means, mini-batch K-means, fuzzy C-means,
//! DBSCAN, mean shift, and Gaussian mixtures with full, tied, and
//! diagonal covariance. Every algorithm is a pure function of
//! (dataset, params, seed); stochastic methods draw all randomness from
//! the seed, so results are bit-reproducible across process restarts.
//!
//! Additional population-based metaheuristics can be plugged in through
//! [`AlgorithmPlugin`] without touching the built-in table.

mod density;
mod hierarchical;
mod kernel;
mod mixture;
mod partitional;

use thiserror::Error;

use crate::indices::{compute_index, orientation, IndexId, Orientation};
use crate::ingest::NumericDataset;
use crate::linalg::pairwise_distances;
use crate::seeding::derive_seed;

/// Identifier of a built-in clustering algorithm. The declaration order
/// fixes the stable ordinal of each algorithm (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    /// Minimum-spanning-tree clustering: cut the K-1 heaviest tree edges.
    Mst,
    /// Agglomerative single linkage.
    Sl,
    /// Agglomerative average linkage.
    Al,
    /// Agglomerative complete linkage.
    Cl,
    /// Agglomerative Ward linkage.
    Wl,
    /// Lloyd K-means with k-means++ seeding.
    Km,
    /// K-harmonic means.
    Khm,
    /// Kernel K-means with an RBF kernel.
    Kkm,
    /// Mini-batch K-means.
    Mbk,
    /// Fuzzy C-means, hard labels by maximum membership.
    Fc,
    /// Density-based spatial clustering with noise.
    Dbscan,
    /// Mean shift with a flat kernel.
    Ms,
    /// Gaussian mixture, full covariance.
    Gmf,
    /// Gaussian mixture, tied covariance.
    Gmt,
    /// Gaussian mixture, diagonal covariance.
    Gmd,
}

pub const ALL_ALGORITHMS: [AlgorithmId; 15] = [
    AlgorithmId::Mst,
    AlgorithmId::Sl,
    AlgorithmId::Al,
    AlgorithmId::Cl,
    AlgorithmId::Wl,
    AlgorithmId::Km,
    AlgorithmId::Khm,
    AlgorithmId::Kkm,
    AlgorithmId::Mbk,
    AlgorithmId::Fc,
    AlgorithmId::Dbscan,
    AlgorithmId::Ms,
    AlgorithmId::Gmf,
    AlgorithmId::Gmt,
    AlgorithmId::Gmd,
];

impl AlgorithmId {
    /// Stable 0-based ordinal; a bijection onto 0..15.
    pub fn ordinal(self) -> usize {
        ALL_ALGORITHMS
            .iter()
            .position(|&a| a == self)
            .expect("algorithm listed")
    }

    pub fn from_ordinal(ord: usize) -> Option<AlgorithmId> {
        ALL_ALGORITHMS.get(ord).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Mst => "MST",
            AlgorithmId::Sl => "SL",
            AlgorithmId::Al => "AL",
            AlgorithmId::Cl => "CL",
            AlgorithmId::Wl => "WL",
            AlgorithmId::Km => "KM",
            AlgorithmId::Khm => "KHM",
            AlgorithmId::Kkm => "KKM",
            AlgorithmId::Mbk => "MBK",
            AlgorithmId::Fc => "FC",
            AlgorithmId::Dbscan => "DBSCAN",
            AlgorithmId::Ms => "MS",
            AlgorithmId::Gmf => "GMF",
            AlgorithmId::Gmt => "GMT",
            AlgorithmId::Gmd => "GMD",
        }
    }

    pub fn from_name(name: &str) -> Option<AlgorithmId> {
        ALL_ALGORITHMS.iter().copied().find(|a| a.name() == name)
    }
}

/// Static capability flags of an algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capability {
    pub deterministic: bool,
    pub needs_k: bool,
    pub density_based: bool,
}

/// The static algorithm table: ids, ordinals, and capability flags.
pub fn supported_algorithms() -> Vec<(AlgorithmId, Capability)> {
    ALL_ALGORITHMS.iter().map(|&a| (a, capability(a))).collect()
}

pub fn capability(a: AlgorithmId) -> Capability {
    use AlgorithmId::*;
    match a {
        Mst | Sl | Al | Cl | Wl => Capability {
            deterministic: true,
            needs_k: true,
            density_based: false,
        },
        Km | Khm | Kkm | Mbk | Fc | Gmf | Gmt | Gmd => Capability {
            deterministic: false,
            needs_k: true,
            density_based: false,
        },
        Dbscan | Ms => Capability {
            deterministic: true,
            needs_k: false,
            density_based: true,
        },
    }
}

/// Concrete hyperparameters for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Params {
    /// Cluster count for algorithms that take K.
    K(usize),
    /// DBSCAN neighborhood radius and core-point threshold.
    DbscanParams { eps: f64, min_pts: usize },
    /// Mean-shift kernel bandwidth.
    Bandwidth(f64),
}

impl std::fmt::Display for Params {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Params::K(k) => write!(f, "k={k}"),
            Params::DbscanParams { eps, min_pts } => {
                write!(f, "eps={eps:?},min_pts={min_pts}")
            }
            Params::Bandwidth(h) => write!(f, "bandwidth={h:?}"),
        }
    }
}

/// A hard clustering of a dataset. Labels are dense in 0..k_effective,
/// with -1 reserved for noise points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringSolution {
    pub labels: Vec<i64>,
    pub k_effective: usize,
    pub seed: u64,
    /// False when the iteration cap was hit before the objective settled.
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("invalid params for {algorithm}: {detail}")]
    InvalidParams {
        algorithm: &'static str,
        detail: String,
    },
    #[error("DBSCAN found no core points")]
    AllNoise,
    #[error("no grid configuration produced a defined score for {algorithm}")]
    NoValidConfiguration { algorithm: &'static str },
}

/// Hyperparameter search space for [`tune_k`].
#[derive(Debug, Clone)]
pub struct HyperparamGrid {
    /// Inclusive K interval for algorithms that take a cluster count.
    pub k_min: usize,
    pub k_max: usize,
    /// Pairwise-distance quantiles tried as DBSCAN eps.
    pub eps_quantiles: Vec<f64>,
    /// DBSCAN core-point thresholds.
    pub min_pts: Vec<usize>,
    /// Pairwise-distance quantiles tried as mean-shift bandwidth.
    pub bandwidth_quantiles: Vec<f64>,
}

impl Default for HyperparamGrid {
    fn default() -> Self {
        HyperparamGrid {
            k_min: 2,
            k_max: 25,
            eps_quantiles: vec![0.10, 0.25, 0.50],
            min_pts: vec![3, 5],
            bandwidth_quantiles: vec![0.10, 0.25, 0.50],
        }
    }
}

impl HyperparamGrid {
    pub fn validate(&self) -> Result<(), ZooError> {
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(ZooError::InvalidParams {
                algorithm: "grid",
                detail: format!("k range {}..{} invalid (min >= 2)", self.k_min, self.k_max),
            });
        }
        Ok(())
    }

    /// Concrete grid points for algorithm `a` on dataset `d`, in search
    /// order (ties during tuning resolve toward earlier points).
    pub fn points_for(&self, d: &NumericDataset, a: AlgorithmId) -> Vec<Params> {
        let cap = capability(a);
        if cap.needs_k {
            let upper = self.k_max.min(d.n_instances());
            return (self.k_min..=upper.max(self.k_min))
                .map(Params::K)
                .collect();
        }
        let mut dists = pairwise_distances(&d.matrix);
        dists.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        let quantile = |q: f64| -> f64 {
            let idx = (q * (dists.len() - 1) as f64).round() as usize;
            dists[idx.min(dists.len() - 1)]
        };
        match a {
            AlgorithmId::Dbscan => {
                let mut points = Vec::new();
                for &q in &self.eps_quantiles {
                    let eps = quantile(q);
                    if eps <= 0.0 {
                        continue;
                    }
                    for &mp in &self.min_pts {
                        points.push(Params::DbscanParams { eps, min_pts: mp });
                    }
                }
                points
            }
            AlgorithmId::Ms => self
                .bandwidth_quantiles
                .iter()
                .map(|&q| quantile(q))
                .filter(|&h| h > 0.0)
                .map(Params::Bandwidth)
                .collect(),
            _ => unreachable!("needs_k handled above"),
        }
    }
}

/// Runs one clustering algorithm with concrete hyperparameters.
///
/// Deterministic given `(d, a, params, seed)`. Output labels are densely
/// relabeled in first-appearance order; noise keeps label -1.
pub fn run_algorithm(
    d: &NumericDataset,
    a: AlgorithmId,
    params: &Params,
    seed: u64,
) -> Result<ClusteringSolution, ZooError> {
    let x = &d.matrix;
    let n = x.nrows();
    let need_k = |p: &Params| -> Result<usize, ZooError> {
        match p {
            Params::K(k) => {
                if *k < 1 || *k > n {
                    Err(ZooError::InvalidParams {
                        algorithm: a.name(),
                        detail: format!("k={k} outside 1..={n}"),
                    })
                } else {
                    Ok(*k)
                }
            }
            other => Err(ZooError::InvalidParams {
                algorithm: a.name(),
                detail: format!("expected k, got {other}"),
            }),
        }
    };

    let (raw_labels, converged) = match a {
        AlgorithmId::Mst => (hierarchical::mst_cut(x, need_k(params)?), true),
        AlgorithmId::Sl => (
            hierarchical::agglomerative(x, need_k(params)?, hierarchical::Linkage::Single),
            true,
        ),
        AlgorithmId::Al => (
            hierarchical::agglomerative(x, need_k(params)?, hierarchical::Linkage::Average),
            true,
        ),
        AlgorithmId::Cl => (
            hierarchical::agglomerative(x, need_k(params)?, hierarchical::Linkage::Complete),
            true,
        ),
        AlgorithmId::Wl => (
            hierarchical::agglomerative(x, need_k(params)?, hierarchical::Linkage::Ward),
            true,
        ),
        AlgorithmId::Km => partitional::kmeans(x, need_k(params)?, seed),
        AlgorithmId::Khm => partitional::k_harmonic_means(x, need_k(params)?, seed),
        AlgorithmId::Kkm => kernel::kernel_kmeans(x, need_k(params)?, seed),
        AlgorithmId::Mbk => partitional::mini_batch_kmeans(x, need_k(params)?, seed),
        AlgorithmId::Fc => partitional::fuzzy_cmeans(x, need_k(params)?, seed),
        AlgorithmId::Dbscan => match params {
            Params::DbscanParams { eps, min_pts } => {
                if *eps <= 0.0 || *min_pts == 0 {
                    return Err(ZooError::InvalidParams {
                        algorithm: a.name(),
                        detail: format!("eps={eps}, min_pts={min_pts}"),
                    });
                }
                (density::dbscan(x, *eps, *min_pts)?, true)
            }
            other => {
                return Err(ZooError::InvalidParams {
                    algorithm: a.name(),
                    detail: format!("expected eps/min_pts, got {other}"),
                })
            }
        },
        AlgorithmId::Ms => match params {
            Params::Bandwidth(h) => {
                if *h <= 0.0 {
                    return Err(ZooError::InvalidParams {
                        algorithm: a.name(),
                        detail: format!("bandwidth={h}"),
                    });
                }
                density::mean_shift(x, *h)
            }
            other => {
                return Err(ZooError::InvalidParams {
                    algorithm: a.name(),
                    detail: format!("expected bandwidth, got {other}"),
                })
            }
        },
        AlgorithmId::Gmf => {
            mixture::gaussian_mixture(x, need_k(params)?, mixture::Covariance::Full, seed)
        }
        AlgorithmId::Gmt => {
            mixture::gaussian_mixture(x, need_k(params)?, mixture::Covariance::Tied, seed)
        }
        AlgorithmId::Gmd => {
            mixture::gaussian_mixture(x, need_k(params)?, mixture::Covariance::Diagonal, seed)
        }
    };

    Ok(finalize(raw_labels, seed, converged))
}

/// Densely relabels clusters in first-appearance order, preserving -1.
fn finalize(raw: Vec<i64>, seed: u64, converged: bool) -> ClusteringSolution {
    let mut mapping: Vec<i64> = Vec::new();
    let mut labels = Vec::with_capacity(raw.len());
    for l in raw {
        if l < 0 {
            labels.push(-1);
            continue;
        }
        let dense = match mapping.iter().position(|&m| m == l) {
            Some(p) => p,
            None => {
                mapping.push(l);
                mapping.len() - 1
            }
        };
        labels.push(dense as i64);
    }
    ClusteringSolution {
        labels,
        k_effective: mapping.len(),
        seed,
        converged,
    }
}

/// Result of a hyperparameter search for one (dataset, algorithm) pair.
#[derive(Debug, Clone)]
pub struct TunedRun {
    pub params: Params,
    pub solution: ClusteringSolution,
    /// Mean index score of the winning grid point over its repeats.
    pub score: f64,
}

/// Exhaustive grid search over K (or the density-method grids), scoring
/// each grid point by the mean index value over `repeats` seeded runs.
///
/// Deterministic algorithms collapse to a single run per grid point.
/// Repeat seeds follow the master-seed scheme
/// `derive_seed(master, dataset, ordinal, repeat)`, so the seeds match
/// the ones used by full-table evaluation. A grid point whose runs all
/// error or produce undefined scores is skipped (partial repeats average
/// over the defined ones); ties resolve toward the earlier grid point,
/// i.e. toward smaller K. The returned solution is the best-scoring
/// individual run of the winning grid point.
pub fn tune_k(
    d: &NumericDataset,
    a: AlgorithmId,
    m: IndexId,
    grid: &HyperparamGrid,
    repeats: usize,
    master_seed: u64,
) -> Result<TunedRun, ZooError> {
    grid.validate()?;
    let cap = capability(a);
    let effective_repeats = if cap.deterministic { 1 } else { repeats.max(1) };
    let better = |candidate: f64, incumbent: f64| match orientation(m) {
        Orientation::Maximize => candidate > incumbent,
        Orientation::Minimize => candidate < incumbent,
    };

    let mut best: Option<TunedRun> = None;
    for params in grid.points_for(d, a) {
        let mut scores = Vec::with_capacity(effective_repeats);
        let mut best_run: Option<(f64, ClusteringSolution)> = None;
        for repeat in 0..effective_repeats {
            let seed = derive_seed(
                master_seed,
                &[&d.name, &a.ordinal().to_string(), &repeat.to_string()],
            );
            let solution = match run_algorithm(d, a, &params, seed) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let score = compute_index(d, &solution, m).expect("labels match dataset");
            if !score.defined {
                continue;
            }
            scores.push(score.value);
            let replace = match &best_run {
                None => true,
                Some((incumbent, _)) => better(score.value, *incumbent),
            };
            if replace {
                best_run = Some((score.value, solution));
            }
        }
        if scores.is_empty() {
            continue;
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let take = match &best {
            None => true,
            Some(t) => better(mean, t.score),
        };
        if take {
            best = Some(TunedRun {
                params,
                solution: best_run.expect("non-empty scores imply a run").1,
                score: mean,
            });
        }
    }
    best.ok_or(ZooError::NoValidConfiguration { algorithm: a.name() })
}

/// Extension point for algorithms not shipped with the crate (for
/// example population-based metaheuristics). A plugin is evaluated with
/// the same seeding and tuning discipline as the built-ins.
pub trait AlgorithmPlugin: Send + Sync {
    fn name(&self) -> &str;
    fn run(
        &self,
        d: &NumericDataset,
        params: &Params,
        seed: u64,
    ) -> Result<ClusteringSolution, ZooError>;
}
