//! Internal clustering validity indices.
//!
//! Ten quality measures computed from a dataset and a hard clustering,
//! without ground-truth labels, plus the optimization orientation of each.
//! The canonical literature definitions are used:
//!
//! - Bezdek-Pal: generalized Dunn GD(4,1) — minimum centroid separation
//!   over maximum cluster diameter (maximize).
//! - Dunn: minimum single-link inter-cluster distance over maximum
//!   cluster diameter (maximize).
//! - Calinski-Harabasz: between/within dispersion ratio scaled by
//!   (n-k)/(k-1) (maximize).
//! - Silhouette: mean of (b-a)/max(a,b); a(i)=0 for singleton clusters
//!   (maximize).
//! - Milligan-Cooper: point-biserial correlation between the pairwise
//!   distance vector and the different-cluster indicator (maximize).
//! - Davies-Bouldin: mean over clusters of the worst (S_i+S_j)/M_ij
//!   ratio (minimize).
//! - Handl-Knowles-Kell: connectivity with L=10 nearest neighbors
//!   (minimize).
//! - Hubert-Levin: C-index (S_w - S_min)/(S_max - S_min) (minimize).
//! - SD-Scat: average cluster variance norm over dataset variance norm,
//!   the scatter component of the SD index (minimize).
//! - Xie-Beni: within-cluster squared error over n times the minimum
//!   squared centroid separation (minimize).
//!
//! Noise points (label -1) are removed before any computation; if fewer
//! than two clusters remain the score is undefined.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::ingest::NumericDataset;
use crate::linalg::{dist, sq_dist};
use crate::zoo::ClusteringSolution;

/// Number of nearest neighbors used by the connectivity index.
pub const CONNECTIVITY_NEIGHBORS: usize = 10;

/// The supported internal quality measures, in their stable table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexId {
    BezdekPal,
    Dunn,
    CalinskiHarabasz,
    Silhouette,
    MilliganCooper,
    DaviesBouldin,
    HandlKnowlesKell,
    HubertLevin,
    SdScat,
    XieBeni,
}

/// Whether larger or smaller index values indicate better clusterings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Maximize,
    Minimize,
}

pub const ALL_INDICES: [IndexId; 10] = [
    IndexId::BezdekPal,
    IndexId::Dunn,
    IndexId::CalinskiHarabasz,
    IndexId::Silhouette,
    IndexId::MilliganCooper,
    IndexId::DaviesBouldin,
    IndexId::HandlKnowlesKell,
    IndexId::HubertLevin,
    IndexId::SdScat,
    IndexId::XieBeni,
];

impl IndexId {
    pub fn name(self) -> &'static str {
        match self {
            IndexId::BezdekPal => "bezdek-pal",
            IndexId::Dunn => "dunn",
            IndexId::CalinskiHarabasz => "calinski-harabasz",
            IndexId::Silhouette => "silhouette",
            IndexId::MilliganCooper => "milligan-cooper",
            IndexId::DaviesBouldin => "davies-bouldin",
            IndexId::HandlKnowlesKell => "handl-knowles-kell",
            IndexId::HubertLevin => "hubert-levin",
            IndexId::SdScat => "sd-scat",
            IndexId::XieBeni => "xie-beni",
        }
    }

    pub fn from_name(name: &str) -> Option<IndexId> {
        ALL_INDICES.iter().copied().find(|i| i.name() == name)
    }
}

/// Optimization orientation of a measure.
pub fn orientation(m: IndexId) -> Orientation {
    match m {
        IndexId::BezdekPal
        | IndexId::Dunn
        | IndexId::CalinskiHarabasz
        | IndexId::Silhouette
        | IndexId::MilliganCooper => Orientation::Maximize,
        IndexId::DaviesBouldin
        | IndexId::HandlKnowlesKell
        | IndexId::HubertLevin
        | IndexId::SdScat
        | IndexId::XieBeni => Orientation::Minimize,
    }
}

/// An index value, or a record that the measure is undefined for the
/// given partition (fewer than two clusters, or a degenerate denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexScore {
    pub value: f64,
    pub defined: bool,
}

impl IndexScore {
    pub fn defined(value: f64) -> Self {
        IndexScore {
            value,
            defined: true,
        }
    }

    pub fn undefined() -> Self {
        IndexScore {
            value: f64::NAN,
            defined: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("labels length {labels} does not match dataset rows {rows}")]
    LabelMismatch { labels: usize, rows: usize },
}

/// Computes measure `m` for solution `s` on dataset `d`.
///
/// Noise points are excluded first. Degenerate partitions (k < 2 after
/// noise removal, or all points in one cluster) yield an undefined score
/// rather than an error.
pub fn compute_index(
    d: &NumericDataset,
    s: &ClusteringSolution,
    m: IndexId,
) -> Result<IndexScore, IndexError> {
    if s.labels.len() != d.n_instances() {
        return Err(IndexError::LabelMismatch {
            labels: s.labels.len(),
            rows: d.n_instances(),
        });
    }

    // Drop noise and re-extract the clustered points.
    let keep: Vec<usize> = (0..s.labels.len()).filter(|&i| s.labels[i] >= 0).collect();
    if keep.len() < 2 {
        return Ok(IndexScore::undefined());
    }
    let mut labels = Vec::with_capacity(keep.len());
    let mut x = Array2::<f64>::zeros((keep.len(), d.n_features()));
    for (row, &i) in keep.iter().enumerate() {
        labels.push(s.labels[i]);
        x.row_mut(row).assign(&d.matrix.row(i));
    }
    compute_index_on(&x, &labels, m)
}

/// Core entry point on an already noise-free matrix and label vector.
pub fn compute_index_on(
    x: &Array2<f64>,
    labels: &[i64],
    m: IndexId,
) -> Result<IndexScore, IndexError> {
    if labels.len() != x.nrows() {
        return Err(IndexError::LabelMismatch {
            labels: labels.len(),
            rows: x.nrows(),
        });
    }
    let clusters = cluster_members(labels);
    if clusters.len() < 2 {
        return Ok(IndexScore::undefined());
    }
    let score = match m {
        IndexId::BezdekPal => bezdek_pal(x, &clusters),
        IndexId::Dunn => dunn(x, &clusters),
        IndexId::CalinskiHarabasz => calinski_harabasz(x, &clusters),
        IndexId::Silhouette => silhouette(x, labels, &clusters),
        IndexId::MilliganCooper => milligan_cooper(x, labels),
        IndexId::DaviesBouldin => davies_bouldin(x, &clusters),
        IndexId::HandlKnowlesKell => connectivity(x, labels),
        IndexId::HubertLevin => hubert_levin(x, labels),
        IndexId::SdScat => sd_scat(x, &clusters),
        IndexId::XieBeni => xie_beni(x, &clusters),
    };
    Ok(score)
}

/// Groups point indices by cluster label, ordered by label value.
fn cluster_members(labels: &[i64]) -> Vec<Vec<usize>> {
    let mut sorted: Vec<i64> = labels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .iter()
        .map(|&l| {
            (0..labels.len())
                .filter(|&i| labels[i] == l)
                .collect::<Vec<_>>()
        })
        .collect()
}

fn centroid(x: &Array2<f64>, members: &[usize]) -> Array1<f64> {
    let mut c = Array1::<f64>::zeros(x.ncols());
    for &i in members {
        c += &x.row(i);
    }
    c / members.len() as f64
}

/// Maximum pairwise distance within a cluster; 0 for singletons.
fn diameter(x: &Array2<f64>, members: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            d = d.max(dist(x.row(i), x.row(j)));
        }
    }
    d
}

fn dunn(x: &Array2<f64>, clusters: &[Vec<usize>]) -> IndexScore {
    let max_diam = clusters.iter().map(|c| diameter(x, c)).fold(0.0, f64::max);
    if max_diam == 0.0 {
        return IndexScore::undefined();
    }
    let mut min_sep = f64::INFINITY;
    for (a, ca) in clusters.iter().enumerate() {
        for cb in &clusters[a + 1..] {
            for &i in ca {
                for &j in cb {
                    min_sep = min_sep.min(dist(x.row(i), x.row(j)));
                }
            }
        }
    }
    IndexScore::defined(min_sep / max_diam)
}

fn bezdek_pal(x: &Array2<f64>, clusters: &[Vec<usize>]) -> IndexScore {
    let max_diam = clusters.iter().map(|c| diameter(x, c)).fold(0.0, f64::max);
    if max_diam == 0.0 {
        return IndexScore::undefined();
    }
    let centroids: Vec<Array1<f64>> = clusters.iter().map(|c| centroid(x, c)).collect();
    let mut min_sep = f64::INFINITY;
    for a in 0..centroids.len() {
        for b in (a + 1)..centroids.len() {
            min_sep = min_sep.min(dist(centroids[a].view(), centroids[b].view()));
        }
    }
    IndexScore::defined(min_sep / max_diam)
}

fn calinski_harabasz(x: &Array2<f64>, clusters: &[Vec<usize>]) -> IndexScore {
    let n = x.nrows();
    let k = clusters.len();
    if n <= k {
        return IndexScore::undefined();
    }
    let overall = centroid(x, &(0..n).collect::<Vec<_>>());
    let mut between = 0.0;
    let mut within = 0.0;
    for members in clusters {
        let c = centroid(x, members);
        between += members.len() as f64 * sq_dist(c.view(), overall.view());
        for &i in members {
            within += sq_dist(x.row(i), c.view());
        }
    }
    if within == 0.0 {
        return IndexScore::undefined();
    }
    IndexScore::defined((between / (k - 1) as f64) / (within / (n - k) as f64))
}

fn silhouette(x: &Array2<f64>, labels: &[i64], clusters: &[Vec<usize>]) -> IndexScore {
    let n = x.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let own_members = clusters
            .iter()
            .find(|c| labels[c[0]] == own)
            .expect("cluster of point exists");
        // a(i): mean distance to other members of the own cluster; 0 by
        // convention when the cluster is a singleton.
        let a = if own_members.len() <= 1 {
            0.0
        } else {
            own_members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dist(x.row(i), x.row(j)))
                .sum::<f64>()
                / (own_members.len() - 1) as f64
        };
        let mut b = f64::INFINITY;
        for members in clusters {
            if labels[members[0]] == own {
                continue;
            }
            let mean = members
                .iter()
                .map(|&j| dist(x.row(i), x.row(j)))
                .sum::<f64>()
                / members.len() as f64;
            b = b.min(mean);
        }
        let denom = a.max(b);
        total += if denom == 0.0 { 0.0 } else { (b - a) / denom };
    }
    IndexScore::defined(total / n as f64)
}

fn milligan_cooper(x: &Array2<f64>, labels: &[i64]) -> IndexScore {
    // Point-biserial correlation between pairwise distances and the
    // "different cluster" indicator, using population moments. Identical
    // to the Pearson correlation of the two vectors.
    let n = x.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    let mut between_flags = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(dist(x.row(i), x.row(j)));
            between_flags.push(labels[i] != labels[j]);
        }
    }
    let total = dists.len() as f64;
    let n_between = between_flags.iter().filter(|&&b| b).count() as f64;
    let n_within = total - n_between;
    if n_between == 0.0 || n_within == 0.0 {
        return IndexScore::undefined();
    }
    let mean_all = dists.iter().sum::<f64>() / total;
    let var = dists
        .iter()
        .map(|d| (d - mean_all) * (d - mean_all))
        .sum::<f64>()
        / total;
    if var == 0.0 {
        return IndexScore::undefined();
    }
    let mean_between = dists
        .iter()
        .zip(&between_flags)
        .filter(|(_, &b)| b)
        .map(|(d, _)| d)
        .sum::<f64>()
        / n_between;
    let mean_within = dists
        .iter()
        .zip(&between_flags)
        .filter(|(_, &b)| !b)
        .map(|(d, _)| d)
        .sum::<f64>()
        / n_within;
    let r = (mean_between - mean_within) / var.sqrt()
        * (n_between * n_within / (total * total)).sqrt();
    IndexScore::defined(r)
}

fn davies_bouldin(x: &Array2<f64>, clusters: &[Vec<usize>]) -> IndexScore {
    let k = clusters.len();
    let centroids: Vec<Array1<f64>> = clusters.iter().map(|c| centroid(x, c)).collect();
    let scatter: Vec<f64> = clusters
        .iter()
        .zip(&centroids)
        .map(|(members, c)| {
            members
                .iter()
                .map(|&i| dist(x.row(i), c.view()))
                .sum::<f64>()
                / members.len() as f64
        })
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist(centroids[i].view(), centroids[j].view());
            if sep == 0.0 {
                return IndexScore::undefined();
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    IndexScore::defined(total / k as f64)
}

fn connectivity(x: &Array2<f64>, labels: &[i64]) -> IndexScore {
    let n = x.nrows();
    let l = CONNECTIVITY_NEIGHBORS.min(n - 1);
    let mut total = 0.0;
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dist(x.row(i), x.row(a))
                .partial_cmp(&dist(x.row(i), x.row(b)))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (rank, &j) in order.iter().take(l).enumerate() {
            if labels[j] != labels[i] {
                total += 1.0 / (rank + 1) as f64;
            }
        }
    }
    IndexScore::defined(total)
}

fn hubert_levin(x: &Array2<f64>, labels: &[i64]) -> IndexScore {
    let n = x.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    let mut within = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(x.row(i), x.row(j));
            dists.push(d);
            if labels[i] == labels[j] {
                within.push(d);
            }
        }
    }
    let nw = within.len();
    if nw == 0 || nw == dists.len() {
        return IndexScore::undefined();
    }
    let sw: f64 = within.iter().sum();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let s_min: f64 = dists[..nw].iter().sum();
    let s_max: f64 = dists[dists.len() - nw..].iter().sum();
    if s_max == s_min {
        return IndexScore::undefined();
    }
    IndexScore::defined((sw - s_min) / (s_max - s_min))
}

fn sd_scat(x: &Array2<f64>, clusters: &[Vec<usize>]) -> IndexScore {
    let m = x.ncols();
    let variance_vector = |members: &[usize]| -> Array1<f64> {
        let c = centroid(x, members);
        let mut v = Array1::<f64>::zeros(m);
        for &i in members {
            for j in 0..m {
                let dlt = x[[i, j]] - c[j];
                v[j] += dlt * dlt;
            }
        }
        v / members.len() as f64
    };
    let all: Vec<usize> = (0..x.nrows()).collect();
    let total_norm = variance_vector(&all)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if total_norm == 0.0 {
        return IndexScore::undefined();
    }
    let mean_cluster_norm = clusters
        .iter()
        .map(|c| {
            variance_vector(c)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / clusters.len() as f64;
    IndexScore::defined(mean_cluster_norm / total_norm)
}

fn xie_beni(x: &Array2<f64>, clusters: &[Vec<usize>]) -> IndexScore {
    let centroids: Vec<Array1<f64>> = clusters.iter().map(|c| centroid(x, c)).collect();
    let mut compactness = 0.0;
    for (members, c) in clusters.iter().zip(&centroids) {
        for &i in members {
            compactness += sq_dist(x.row(i), c.view());
        }
    }
    let mut min_sep = f64::INFINITY;
    for a in 0..centroids.len() {
        for b in (a + 1)..centroids.len() {
            min_sep = min_sep.min(sq_dist(centroids[a].view(), centroids[b].view()));
        }
    }
    if min_sep == 0.0 {
        return IndexScore::undefined();
    }
    IndexScore::defined(compactness / (x.nrows() as f64 * min_sep))
}
