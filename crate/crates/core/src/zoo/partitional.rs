//! Center-based partitional algorithms: K-means, mini-batch K-means,
//! K-harmonic means, and fuzzy C-means.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::sq_dist;

pub const MAX_ITERATIONS: usize = 300;
pub const OBJECTIVE_TOLERANCE: f64 = 1e-6;
const MINI_BATCH_SIZE: usize = 100;
/// Harmonic exponent for K-harmonic means.
const KHM_P: f64 = 3.5;
/// Fuzzifier for fuzzy C-means.
const FCM_M: f64 = 2.0;

/// k-means++ seeding: D^2-weighted center selection.
pub fn kmeans_pp_centers(x: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let m = x.ncols();
    let mut centers = Array2::<f64>::zeros((k, m));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));

    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            // all remaining points coincide with a chosen center
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.row_mut(c).assign(&x.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(x.row(i), centers.row(c)));
        }
    }
    centers
}

fn nearest_center(x: &Array2<f64>, centers: &Array2<f64>, i: usize) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for c in 0..centers.nrows() {
        let d = sq_dist(x.row(i), centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd K-means. Returns raw labels plus a convergence flag.
pub fn kmeans(x: &Array2<f64>, k: usize, seed: u64) -> (Vec<i64>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.nrows();
    let m = x.ncols();
    let mut centers = kmeans_pp_centers(x, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let mut obj = 0.0;
        for i in 0..n {
            let (c, d) = nearest_center(x, &centers, i);
            labels[i] = c;
            obj += d;
        }
        let mut sums = Array2::<f64>::zeros((k, m));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..m {
                sums[[labels[i], j]] += x[[i, j]];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seat an empty center on the point farthest from its
                // current center (deterministic: first maximum).
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(x.row(a), centers.row(labels[a]))
                            .partial_cmp(&sq_dist(x.row(b), centers.row(labels[b])))
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                centers.row_mut(c).assign(&x.row(far));
            } else {
                for j in 0..m {
                    centers[[c, j]] = sums[[c, j]] / counts[c] as f64;
                }
            }
        }
        if (prev_obj - obj).abs() <= OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    (labels.iter().map(|&l| l as i64).collect(), converged)
}

/// Mini-batch K-means with per-center learning rates.
pub fn mini_batch_kmeans(x: &Array2<f64>, k: usize, seed: u64) -> (Vec<i64>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.nrows();
    let m = x.ncols();
    let batch = MINI_BATCH_SIZE.min(n);
    let mut centers = kmeans_pp_centers(x, k, &mut rng);
    let mut counts = vec![0u64; k];
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let sample: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n)).collect();
        let assigned: Vec<usize> = sample
            .iter()
            .map(|&i| nearest_center(x, &centers, i).0)
            .collect();
        for (&i, &c) in sample.iter().zip(&assigned) {
            counts[c] += 1;
            let lr = 1.0 / counts[c] as f64;
            for j in 0..m {
                centers[[c, j]] += lr * (x[[i, j]] - centers[[c, j]]);
            }
        }
        let obj: f64 = (0..n).map(|i| nearest_center(x, &centers, i).1).sum();
        if (prev_obj - obj).abs() <= OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    let labels = (0..n)
        .map(|i| nearest_center(x, &centers, i).0 as i64)
        .collect();
    (labels, converged)
}

/// K-harmonic means with harmonic exponent p = 3.5.
pub fn k_harmonic_means(x: &Array2<f64>, k: usize, seed: u64) -> (Vec<i64>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.nrows();
    let m = x.ncols();
    let mut centers = kmeans_pp_centers(x, k, &mut rng);
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    let floor = 1e-12;

    for _ in 0..MAX_ITERATIONS {
        // objective: sum_i k / sum_c d_ic^-p
        let mut obj = 0.0;
        let mut num = Array2::<f64>::zeros((k, m));
        let mut den = vec![0.0f64; k];
        for i in 0..n {
            let d: Vec<f64> = (0..k)
                .map(|c| sq_dist(x.row(i), centers.row(c)).sqrt().max(floor))
                .collect();
            let inv_p: Vec<f64> = d.iter().map(|&v| v.powf(-KHM_P)).collect();
            let inv_p2: Vec<f64> = d.iter().map(|&v| v.powf(-KHM_P - 2.0)).collect();
            let sum_inv_p: f64 = inv_p.iter().sum();
            let sum_inv_p2: f64 = inv_p2.iter().sum();
            obj += k as f64 / sum_inv_p;
            // weight of point i and its membership per center
            let w = sum_inv_p2 / (sum_inv_p * sum_inv_p);
            for c in 0..k {
                let q = inv_p2[c] / sum_inv_p2 * w;
                den[c] += q;
                for j in 0..m {
                    num[[c, j]] += q * x[[i, j]];
                }
            }
        }
        for c in 0..k {
            if den[c] > 0.0 {
                for j in 0..m {
                    centers[[c, j]] = num[[c, j]] / den[c];
                }
            }
        }
        if (prev_obj - obj).abs() <= OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    let labels = (0..n)
        .map(|i| nearest_center(x, &centers, i).0 as i64)
        .collect();
    (labels, converged)
}

/// Fuzzy C-means (fuzzifier 2.0); hard labels by maximum membership.
pub fn fuzzy_cmeans(x: &Array2<f64>, k: usize, seed: u64) -> (Vec<i64>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.nrows();
    let m = x.ncols();
    let floor = 1e-12;

    // random membership init, rows normalized
    let mut u = Array2::<f64>::zeros((n, k));
    for i in 0..n {
        let mut row_sum = 0.0;
        for c in 0..k {
            let v = rng.random::<f64>().max(floor);
            u[[i, c]] = v;
            row_sum += v;
        }
        for c in 0..k {
            u[[i, c]] /= row_sum;
        }
    }

    let mut centers = Array2::<f64>::zeros((k, m));
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    let exponent = 2.0 / (FCM_M - 1.0);

    for _ in 0..MAX_ITERATIONS {
        // centers from memberships
        for c in 0..k {
            let mut den = 0.0;
            let mut num = Array1::<f64>::zeros(m);
            for i in 0..n {
                let w = u[[i, c]].powf(FCM_M);
                den += w;
                for j in 0..m {
                    num[j] += w * x[[i, j]];
                }
            }
            if den > 0.0 {
                for j in 0..m {
                    centers[[c, j]] = num[j] / den;
                }
            }
        }
        // memberships from centers, and the objective
        let mut obj = 0.0;
        for i in 0..n {
            let d: Vec<f64> = (0..k)
                .map(|c| sq_dist(x.row(i), centers.row(c)).sqrt().max(floor))
                .collect();
            for c in 0..k {
                let denom: f64 = (0..k).map(|j| (d[c] / d[j]).powf(exponent)).sum();
                u[[i, c]] = 1.0 / denom;
            }
            for c in 0..k {
                obj += u[[i, c]].powf(FCM_M) * d[c] * d[c];
            }
        }
        if (prev_obj - obj).abs() <= OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
        prev_obj = obj;
    }

    let labels = (0..n)
        .map(|i| {
            (0..k)
                .max_by(|&a, &b| {
                    u[[i, a]]
                        .partial_cmp(&u[[i, b]])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                })
                .expect("k >= 1") as i64
        })
        .collect();
    (labels, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_blobs() -> Array2<f64> {
        array![
            [0.0, 0.0],
            [0.01, 0.0],
            [0.0, 0.01],
            [0.99, 1.0],
            [1.0, 1.0],
            [1.0, 0.99]
        ]
    }

    #[test]
    fn kmeans_separates_two_blobs() {
        let x = two_blobs();
        let (labels, converged) = kmeans(&x, 2, 7);
        assert!(converged);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[4], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let x = two_blobs();
        let (a, _) = kmeans(&x, 2, 42);
        let (b, _) = kmeans(&x, 2, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn variants_separate_two_blobs() {
        let x = two_blobs();
        for f in [mini_batch_kmeans, k_harmonic_means, fuzzy_cmeans] {
            let (labels, _) = f(&x, 2, 11);
            assert_eq!(labels[0], labels[1], "{labels:?}");
            assert_eq!(labels[3], labels[4], "{labels:?}");
            assert_ne!(labels[0], labels[3], "{labels:?}");
        }
    }
}
