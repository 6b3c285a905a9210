//! Dataset-to-graph conversion: PCA reduction and the weighted
//! cosine-similarity graph over instances.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::NumericDataset;
use crate::linalg::sym_eigen;

/// Similarity threshold above which instances are connected.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.9;
/// Cumulative explained-variance fraction kept by default.
pub const DEFAULT_VARIANCE_TARGET: f64 = 0.90;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vectors have different lengths: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("malformed graph: {0}")]
    Codec(String),
}

/// A dataset after dimensionality reduction: scores on the principal
/// directions, the explained-variance fraction per kept component, and
/// the column means removed before rotation.
///
/// With PCA disabled (the ablation), the matrix passes through unchanged,
/// `mean_vector` is zero, and `explained_variance` carries the raw
/// per-column variance fractions in column order.
#[derive(Debug, Clone)]
pub struct ReducedDataset {
    pub matrix: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub mean_vector: Vec<f64>,
    /// Orthonormal feature-space directions, one column per kept
    /// component (identity-like for the pass-through case).
    pub components: Array2<f64>,
    pub pca_applied: bool,
}

/// PCA with the smallest q whose cumulative explained variance reaches
/// `variance_target`. Deterministic sign convention: each component's
/// largest-magnitude coordinate is positive. The eigendecomposition runs
/// on whichever of the covariance (m x m) or Gram (n x n) matrix is
/// smaller.
pub fn pca_reduce(d: &NumericDataset, variance_target: f64, enabled: bool) -> ReducedDataset {
    let x = &d.matrix;
    let n = x.nrows();
    let m = x.ncols();
    assert!(n >= 2, "pca_reduce requires at least 2 instances");

    if !enabled {
        let mut fractions: Vec<f64> = (0..m)
            .map(|j| {
                let col = x.column(j);
                let mean = col.iter().sum::<f64>() / n as f64;
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
            })
            .collect();
        let total: f64 = fractions.iter().sum();
        if total > 0.0 {
            for f in &mut fractions {
                *f /= total;
            }
        }
        return ReducedDataset {
            matrix: x.clone(),
            explained_variance: fractions,
            mean_vector: vec![0.0; m],
            components: Array2::eye(m),
            pca_applied: false,
        };
    }

    // center columns
    let mean: Vec<f64> = (0..m)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let mut centered = x.clone();
    for i in 0..n {
        for j in 0..m {
            centered[[i, j]] -= mean[j];
        }
    }

    // eigendecompose the smaller of X^T X and X X^T
    let r = n.min(m);
    let (mut eigenvalues, mut components, mut scores): (Vec<f64>, Array2<f64>, Array2<f64>);
    if m <= n {
        let mut cov = centered.t().dot(&centered);
        cov.mapv_inplace(|v| v / (n as f64 - 1.0));
        let (vals, vecs) = sym_eigen(&cov);
        eigenvalues = vals.iter().map(|&v| v.max(0.0)).collect();
        components = vecs; // columns are feature-space directions
        scores = centered.dot(&components);
    } else {
        let gram = centered.dot(&centered.t());
        let (vals, u) = sym_eigen(&gram);
        // gram eigenvalues are squared singular values
        eigenvalues = vals.iter().take(r).map(|&v| (v / (n as f64 - 1.0)).max(0.0)).collect();
        let mut comp = Array2::<f64>::zeros((m, r));
        let mut sc = Array2::<f64>::zeros((n, r));
        for c in 0..r {
            let s2 = vals[c].max(0.0);
            let s = s2.sqrt();
            if s > 1e-300 {
                // v_c = X^T u_c / s
                let v = centered.t().dot(&u.column(c));
                for j in 0..m {
                    comp[[j, c]] = v[j] / s;
                }
                for i in 0..n {
                    sc[[i, c]] = u[[i, c]] * s;
                }
            }
        }
        components = comp;
        scores = sc;
    }
    eigenvalues.truncate(r);

    // sign convention: largest-magnitude coordinate of each component positive
    for c in 0..r.min(components.ncols()) {
        let col = components.column(c);
        let mut pick = 0usize;
        for j in 1..col.len() {
            if col[j].abs() > col[pick].abs() {
                pick = j;
            }
        }
        if col[pick] < 0.0 {
            for j in 0..components.nrows() {
                components[[j, c]] = -components[[j, c]];
            }
            for i in 0..n {
                scores[[i, c]] = -scores[[i, c]];
            }
        }
    }

    let total: f64 = eigenvalues.iter().sum();
    let fractions: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|&v| v / total).collect()
    } else {
        vec![0.0; eigenvalues.len()]
    };

    // smallest q reaching the target (at least 1)
    let mut q = 1;
    let mut cum = fractions.first().copied().unwrap_or(0.0);
    while q < fractions.len() && cum + 1e-12 < variance_target {
        cum += fractions[q];
        q += 1;
    }

    let mut reduced = Array2::<f64>::zeros((n, q));
    let mut kept = Array2::<f64>::zeros((m, q));
    for c in 0..q {
        for i in 0..n {
            reduced[[i, c]] = scores[[i, c]];
        }
        for j in 0..m {
            kept[[j, c]] = components[[j, c]];
        }
    }
    ReducedDataset {
        matrix: reduced,
        explained_variance: fractions[..q].to_vec(),
        mean_vector: mean,
        components: kept,
        pca_applied: true,
    }
}

/// Cosine similarity u.v / (|u||v|); 0 when either vector is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, GraphError> {
    if u.len() != v.len() {
        return Err(GraphError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}

/// Weighted undirected similarity graph over instances. Edges are stored
/// once with i < j, sorted lexicographically; every weight exceeds the
/// construction threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub node_count: usize,
    pub threshold: f64,
    pub edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl SimilarityGraph {
    pub fn from_edges(
        node_count: usize,
        threshold: f64,
        edges: Vec<(usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); node_count];
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, w) in &edges {
            if i >= j || j >= node_count {
                return Err(GraphError::Codec(format!("bad edge ({i},{j})")));
            }
            if !w.is_finite() {
                return Err(GraphError::Codec(format!("non-finite weight on ({i},{j})")));
            }
            if let Some(p) = prev {
                if (i, j) <= p {
                    return Err(GraphError::Codec("edges not strictly sorted".into()));
                }
            }
            prev = Some((i, j));
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        Ok(SimilarityGraph {
            node_count,
            threshold,
            edges,
            adjacency,
        })
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weighted_degree(&self, node: usize) -> f64 {
        self.adjacency[node].iter().map(|(_, w)| w).sum()
    }

    /// Dense symmetric adjacency with zero diagonal.
    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let mut z = Array2::<f64>::zeros((self.node_count, self.node_count));
        for &(i, j, w) in &self.edges {
            z[[i, j]] = w;
            z[[j, i]] = w;
        }
        z
    }

    /// Text serialization: header plus sorted edge triples.
    pub fn encode(&self) -> String {
        let mut out = String::from("clustrec-graph v1\n");
        out.push_str(&format!("nodes={}\n", self.node_count));
        out.push_str(&format!("threshold={:?}\n", self.threshold));
        out.push_str(&format!("edges={}\n", self.edges.len()));
        for &(i, j, w) in &self.edges {
            out.push_str(&format!("{i}\t{j}\t{w:?}\n"));
        }
        out
    }

    pub fn decode(text: &str) -> Result<SimilarityGraph, GraphError> {
        let bad = |m: &str| GraphError::Codec(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("clustrec-graph v1") {
            return Err(bad("missing magic line"));
        }
        let nodes: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("nodes="))
            .ok_or_else(|| bad("missing nodes"))?
            .parse()
            .map_err(|_| bad("bad nodes"))?;
        let threshold: f64 = lines
            .next()
            .and_then(|l| l.strip_prefix("threshold="))
            .ok_or_else(|| bad("missing threshold"))?
            .parse()
            .map_err(|_| bad("bad threshold"))?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("edges="))
            .ok_or_else(|| bad("missing edges"))?
            .parse()
            .map_err(|_| bad("bad edge count"))?;
        if nodes > 50_000_000 {
            return Err(bad("implausible node count"));
        }
        let mut edges = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let i: usize = fields
                .next()
                .ok_or_else(|| bad("edge missing i"))?
                .parse()
                .map_err(|_| bad("bad edge i"))?;
            let j: usize = fields
                .next()
                .ok_or_else(|| bad("edge missing j"))?
                .parse()
                .map_err(|_| bad("bad edge j"))?;
            let w: f64 = fields
                .next()
                .ok_or_else(|| bad("edge missing weight"))?
                .parse()
                .map_err(|_| bad("bad edge weight"))?;
            if fields.next().is_some() {
                return Err(bad("trailing edge fields"));
            }
            edges.push((i, j, w));
        }
        if edges.len() != count {
            return Err(bad("edge count mismatch"));
        }
        SimilarityGraph::from_edges(nodes, threshold, edges)
    }
}

/// Builds the similarity graph: an edge (i, j, s_ij) for every pair with
/// cosine similarity strictly greater than `threshold`. Isolated nodes
/// are permitted.
pub fn build_similarity_graph(r: &ReducedDataset, threshold: f64) -> SimilarityGraph {
    let n = r.matrix.nrows();
    let rows: Vec<Array1<f64>> = (0..n).map(|i| r.matrix.row(i).to_owned()).collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let per_node: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::new();
            for j in (i + 1)..n {
                if norms[i] == 0.0 || norms[j] == 0.0 {
                    continue;
                }
                let dot: f64 = rows[i]
                    .iter()
                    .zip(rows[j].iter())
                    .map(|(a, b)| a * b)
                    .sum();
                let s = dot / (norms[i] * norms[j]);
                if s > threshold {
                    local.push((i, j, s));
                }
            }
            local
        })
        .collect();

    let edges: Vec<(usize, usize, f64)> = per_node.into_iter().flatten().collect();
    SimilarityGraph::from_edges(n, threshold, edges).expect("construction yields sorted edges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::NumericDataset;
    use ndarray::array;

    fn ds(matrix: Array2<f64>) -> NumericDataset {
        NumericDataset::from_matrix("t", matrix)
    }

    #[test]
    fn rank_one_data_reduces_to_single_component() {
        // points exactly on the line y = 2x
        let d = ds(array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        let r = pca_reduce(&d, 0.90, true);
        assert_eq!(r.matrix.ncols(), 1);
        assert!((r.explained_variance[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn passthrough_when_disabled() {
        let d = ds(array![[0.1, 0.9], [0.4, 0.2], [0.8, 0.5]]);
        let r = pca_reduce(&d, 0.90, false);
        assert_eq!(r.matrix, d.matrix);
        assert!(!r.pca_applied);
        assert_eq!(r.mean_vector, vec![0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - 0.70710678).abs() < 1e-8);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn graph_roundtrip_and_adjacency() {
        let g = SimilarityGraph::from_edges(4, 0.9, vec![(0, 1, 0.95), (1, 3, 0.91)]).unwrap();
        let text = g.encode();
        let back = SimilarityGraph::decode(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.neighbors(1), &[(0, 0.95), (3, 0.91)]);
        let z = back.adjacency_matrix();
        assert_eq!(z[[0, 1]], 0.95);
        assert_eq!(z[[1, 0]], 0.95);
        assert_eq!(z[[2, 2]], 0.0);
    }

    #[test]
    fn decode_rejects_malformed() {
        assert!(SimilarityGraph::decode("junk").is_err());
        assert!(SimilarityGraph::decode("clustrec-graph v1\nnodes=2\n").is_err());
        // unsorted edges
        let text = "clustrec-graph v1\nnodes=3\nthreshold=0.9\nedges=2\n1\t2\t0.95\n0\t1\t0.91\n";
        assert!(SimilarityGraph::decode(text).is_err());
        // self edge
        let text = "clustrec-graph v1\nnodes=3\nthreshold=0.9\nedges=1\n1\t1\t0.95\n";
        assert!(SimilarityGraph::decode(text).is_err());
    }
}
