//! Kernel K-means with an RBF kernel whose bandwidth is the median
//! pairwise distance of the dataset.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{pairwise_distances, sq_dist};

use super::partitional::{MAX_ITERATIONS, OBJECTIVE_TOLERANCE};

pub fn kernel_kmeans(x: &Array2<f64>, k: usize, seed: u64) -> (Vec<i64>, bool) {
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut dists = pairwise_distances(x);
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = if dists.is_empty() {
        1.0
    } else {
        dists[dists.len() / 2]
    };
    let sigma2 = (median * median).max(1e-12);

    let mut kernel = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = (-sq_dist(x.row(i), x.row(j)) / (2.0 * sigma2)).exp();
            kernel[[i, j]] = v;
            kernel[[j, i]] = v;
        }
    }

    // random initial assignment with every cluster non-empty
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    for c in 0..k.min(n) {
        labels[c] = c;
    }

    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        // per-cluster kernel sums
        let members: Vec<Vec<usize>> = (0..k)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect();
        let self_terms: Vec<f64> = members
            .iter()
            .map(|ms| {
                if ms.is_empty() {
                    return 0.0;
                }
                let mut s = 0.0;
                for &a in ms {
                    for &b in ms {
                        s += kernel[[a, b]];
                    }
                }
                s / (ms.len() * ms.len()) as f64
            })
            .collect();

        let mut obj = 0.0;
        let mut next = vec![0usize; n];
        for i in 0..n {
            let mut best = (usize::MAX, f64::INFINITY);
            for c in 0..k {
                if members[c].is_empty() {
                    continue;
                }
                let cross: f64 = members[c].iter().map(|&j| kernel[[i, j]]).sum::<f64>()
                    / members[c].len() as f64;
                let d = kernel[[i, i]] - 2.0 * cross + self_terms[c];
                if d < best.1 {
                    best = (c, d);
                }
            }
            next[i] = best.0;
            obj += best.1;
        }
        labels = next;
        if (prev_obj - obj).abs() <= OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    (labels.iter().map(|&l| l as i64).collect(), converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_two_blobs() {
        let x = array![
            [0.0, 0.0],
            [0.05, 0.0],
            [0.0, 0.05],
            [1.0, 1.0],
            [1.05, 1.0],
            [1.0, 1.05]
        ];
        let (labels, _) = kernel_kmeans(&x, 2, 3);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_ne!(labels[0], labels[3]);
    }
}
