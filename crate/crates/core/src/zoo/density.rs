//! Density-based methods: DBSCAN and flat-kernel mean shift.

use ndarray::{Array1, Array2};

use crate::linalg::dist;

use super::ZooError;

/// DBSCAN. Neighborhood counts include the point itself; noise keeps
/// label -1. Errors with `AllNoise` when no core point exists.
pub fn dbscan(x: &Array2<f64>, eps: f64, min_pts: usize) -> Result<Vec<i64>, ZooError> {
    let n = x.nrows();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| dist(x.row(i), x.row(j)) <= eps)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|ns| ns.len() >= min_pts).collect();
    if !core.iter().any(|&c| c) {
        return Err(ZooError::AllNoise);
    }

    let mut labels = vec![-1i64; n];
    let mut cluster = 0i64;
    for i in 0..n {
        if labels[i] != -1 || !core[i] {
            continue;
        }
        // breadth-first expansion from the core point, in index order
        labels[i] = cluster;
        let mut queue = vec![i];
        while let Some(p) = queue.pop() {
            for &q in &neighbors[p] {
                if labels[q] == -1 {
                    labels[q] = cluster;
                    if core[q] {
                        queue.push(q);
                    }
                }
            }
        }
        cluster += 1;
    }
    Ok(labels)
}

const MS_MAX_ITERATIONS: usize = 300;
const MS_SHIFT_TOLERANCE: f64 = 1e-5;

/// Mean shift with a flat kernel of radius `bandwidth`. Every point is
/// shifted to the mean of its in-window neighbors until the shift is
/// negligible; converged modes within bandwidth/2 merge into one cluster.
pub fn mean_shift(x: &Array2<f64>, bandwidth: f64) -> (Vec<i64>, bool) {
    let n = x.nrows();
    let m = x.ncols();
    let mut modes = Array2::<f64>::zeros((n, m));
    let mut all_converged = true;

    for i in 0..n {
        let mut y = x.row(i).to_owned();
        let mut converged = false;
        for _ in 0..MS_MAX_ITERATIONS {
            let mut mean = Array1::<f64>::zeros(m);
            let mut count = 0usize;
            for j in 0..n {
                if dist(y.view(), x.row(j)) <= bandwidth {
                    mean += &x.row(j);
                    count += 1;
                }
            }
            mean /= count.max(1) as f64;
            let shift = dist(y.view(), mean.view());
            y = mean;
            if shift <= MS_SHIFT_TOLERANCE {
                converged = true;
                break;
            }
        }
        all_converged &= converged;
        modes.row_mut(i).assign(&y);
    }

    // Merge modes closer than bandwidth/2, scanning in index order.
    let mut representatives: Vec<usize> = Vec::new();
    let mut labels = vec![0i64; n];
    for i in 0..n {
        let found = representatives
            .iter()
            .position(|&r| dist(modes.row(i), modes.row(r)) <= bandwidth / 2.0);
        match found {
            Some(idx) => labels[i] = idx as i64,
            None => {
                representatives.push(i);
                labels[i] = (representatives.len() - 1) as i64;
            }
        }
    }
    (labels, all_converged)
}
