//! Agglomerative linkage clustering and minimum-spanning-tree clustering.
//!
//! Agglomerative merging uses the Lance-Williams updates on a dense
//! distance matrix (squared distances for Ward). Ties always resolve to
//! the lexicographically smallest cluster pair, so cutting the merge
//! sequence at K and K+1 yields nested partitions.

use ndarray::Array2;

use crate::linalg::{dist, sq_dist};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Average,
    Complete,
    Ward,
}

/// Agglomerative clustering cut at `k` clusters.
pub fn agglomerative(x: &Array2<f64>, k: usize, linkage: Linkage) -> Vec<i64> {
    let n = x.nrows();
    if k >= n {
        return (0..n as i64).collect();
    }

    // d[i][j] holds the current linkage dissimilarity between active
    // clusters i and j (squared Euclidean for Ward).
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = match linkage {
                Linkage::Ward => sq_dist(x.row(i), x.row(j)),
                _ => dist(x.row(i), x.row(j)),
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }

    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<f64> = vec![1.0; n];
    let mut assignment: Vec<usize> = (0..n).collect();

    for _merge in 0..(n - k) {
        // Find the closest active pair; ties break to the smallest (i, j).
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                if d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (i, j, dij) = best;
        debug_assert!(i < n && j < n);

        // Merge j into i, then update distances via Lance-Williams.
        for t in 0..n {
            if !active[t] || t == i || t == j {
                continue;
            }
            let dti = d[t][i];
            let dtj = d[t][j];
            let updated = match linkage {
                Linkage::Single => dti.min(dtj),
                Linkage::Complete => dti.max(dtj),
                Linkage::Average => (size[i] * dti + size[j] * dtj) / (size[i] + size[j]),
                Linkage::Ward => {
                    let st = size[t];
                    let si = size[i];
                    let sj = size[j];
                    ((st + si) * dti + (st + sj) * dtj - st * dij) / (st + si + sj)
                }
            };
            d[t][i] = updated;
            d[i][t] = updated;
        }
        active[j] = false;
        size[i] += size[j];
        for a in assignment.iter_mut() {
            if *a == j {
                *a = i;
            }
        }
    }

    assignment.iter().map(|&a| a as i64).collect()
}

/// Minimum-spanning-tree clustering: build the Euclidean MST (Prim) and
/// remove the k-1 heaviest tree edges; connected components are clusters.
pub fn mst_cut(x: &Array2<f64>, k: usize) -> Vec<i64> {
    let n = x.nrows();
    if k >= n {
        return (0..n as i64).collect();
    }

    // Prim's algorithm over the dense distance graph.
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    for j in 1..n {
        best_dist[j] = dist(x.row(0), x.row(j));
    }
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_d = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best_dist[j] < pick_d {
                pick_d = best_dist[j];
                pick = j;
            }
        }
        let (a, b) = (best_from[pick].min(pick), best_from[pick].max(pick));
        edges.push((pick_d, a, b));
        in_tree[pick] = true;
        for j in 0..n {
            if !in_tree[j] {
                let dj = dist(x.row(pick), x.row(j));
                if dj < best_dist[j] {
                    best_dist[j] = dj;
                    best_from[j] = pick;
                }
            }
        }
    }

    // Keep all but the k-1 heaviest edges (heaviest first; ties by the
    // larger endpoint pair so removal is deterministic).
    edges.sort_by(|l, r| {
        r.0.partial_cmp(&l.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(r.1.cmp(&l.1))
            .then(r.2.cmp(&l.2))
    });
    let kept = &edges[(k - 1)..];

    // Union-find over the kept edges.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(_, a, b) in kept {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi] = lo;
        }
    }
    (0..n)
        .map(|v| find(&mut parent, v) as i64)
        .collect()
}
