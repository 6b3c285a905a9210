//! Gaussian mixture models fit by expectation-maximization, with full,
//! tied, or diagonal covariance. Hard labels by maximum responsibility.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{cholesky, cholesky_log_det, cholesky_solve, sq_dist};

use super::partitional::{kmeans_pp_centers, MAX_ITERATIONS, OBJECTIVE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariance {
    Full,
    Tied,
    Diagonal,
}

/// Diagonal regularization added to every covariance estimate.
const COVARIANCE_REG: f64 = 1e-6;
const LN_2PI: f64 = 1.8378770664093453;

enum FittedCov {
    Full(Vec<(Array2<f64>, f64)>), // (cholesky factor, log det) per component
    Tied(Array2<f64>, f64),
    Diagonal(Vec<Array1<f64>>), // variances per component
}

pub fn gaussian_mixture(
    x: &Array2<f64>,
    k: usize,
    covariance: Covariance,
    seed: u64,
) -> (Vec<i64>, bool) {
    let n = x.nrows();
    let m = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut means = kmeans_pp_centers(x, k, &mut rng);
    // one-hot responsibilities from the initial hard assignment
    let mut resp = Array2::<f64>::zeros((n, k));
    for i in 0..n {
        let mut best = (0usize, f64::INFINITY);
        for c in 0..k {
            let d = sq_dist(x.row(i), means.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        resp[[i, best.0]] = 1.0;
    }

    let mut weights = vec![1.0 / k as f64; k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        // M step
        let nk: Vec<f64> = (0..k)
            .map(|c| (0..n).map(|i| resp[[i, c]]).sum::<f64>().max(1e-10))
            .collect();
        let total: f64 = nk.iter().sum();
        for c in 0..k {
            weights[c] = nk[c] / total;
            for j in 0..m {
                means[[c, j]] = (0..n).map(|i| resp[[i, c]] * x[[i, j]]).sum::<f64>() / nk[c];
            }
        }

        let fitted = match covariance {
            Covariance::Full => {
                let mut per = Vec::with_capacity(k);
                for c in 0..k {
                    let mut cov = Array2::<f64>::zeros((m, m));
                    for i in 0..n {
                        let r = resp[[i, c]];
                        if r == 0.0 {
                            continue;
                        }
                        for a in 0..m {
                            let da = x[[i, a]] - means[[c, a]];
                            for b in a..m {
                                let v = r * da * (x[[i, b]] - means[[c, b]]);
                                cov[[a, b]] += v;
                            }
                        }
                    }
                    for a in 0..m {
                        for b in a..m {
                            cov[[a, b]] /= nk[c];
                            cov[[b, a]] = cov[[a, b]];
                        }
                        cov[[a, a]] += COVARIANCE_REG;
                    }
                    per.push(factor(cov));
                }
                FittedCov::Full(per)
            }
            Covariance::Tied => {
                let mut cov = Array2::<f64>::zeros((m, m));
                for c in 0..k {
                    for i in 0..n {
                        let r = resp[[i, c]];
                        if r == 0.0 {
                            continue;
                        }
                        for a in 0..m {
                            let da = x[[i, a]] - means[[c, a]];
                            for b in a..m {
                                cov[[a, b]] += r * da * (x[[i, b]] - means[[c, b]]);
                            }
                        }
                    }
                }
                for a in 0..m {
                    for b in a..m {
                        cov[[a, b]] /= n as f64;
                        cov[[b, a]] = cov[[a, b]];
                    }
                    cov[[a, a]] += COVARIANCE_REG;
                }
                let (l, logdet) = factor(cov);
                FittedCov::Tied(l, logdet)
            }
            Covariance::Diagonal => {
                let mut per = Vec::with_capacity(k);
                for c in 0..k {
                    let mut var = Array1::<f64>::zeros(m);
                    for i in 0..n {
                        let r = resp[[i, c]];
                        if r == 0.0 {
                            continue;
                        }
                        for j in 0..m {
                            let dj = x[[i, j]] - means[[c, j]];
                            var[j] += r * dj * dj;
                        }
                    }
                    for j in 0..m {
                        var[j] = var[j] / nk[c] + COVARIANCE_REG;
                    }
                    per.push(var);
                }
                FittedCov::Diagonal(per)
            }
        };

        // E step with log-sum-exp normalization
        let mut ll = 0.0;
        for i in 0..n {
            let mut logp = vec![0.0f64; k];
            for c in 0..k {
                let lp = match &fitted {
                    FittedCov::Full(per) => {
                        let (l, logdet) = &per[c];
                        log_gaussian(x, i, &means, c, l, *logdet)
                    }
                    FittedCov::Tied(l, logdet) => log_gaussian(x, i, &means, c, l, *logdet),
                    FittedCov::Diagonal(per) => {
                        let var = &per[c];
                        let mut quad = 0.0;
                        let mut logdet = 0.0;
                        for j in 0..m {
                            let dj = x[[i, j]] - means[[c, j]];
                            quad += dj * dj / var[j];
                            logdet += var[j].ln();
                        }
                        -0.5 * (m as f64 * LN_2PI + logdet + quad)
                    }
                };
                logp[c] = weights[c].max(1e-300).ln() + lp;
            }
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logp.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            ll += lse;
            for c in 0..k {
                resp[[i, c]] = (logp[c] - lse).exp();
            }
        }
        let mean_ll = ll / n as f64;
        if (mean_ll - prev_ll).abs() <= OBJECTIVE_TOLERANCE {
            converged = true;
            break;
        }
        prev_ll = mean_ll;
    }

    let labels = (0..n)
        .map(|i| {
            (0..k)
                .max_by(|&a, &b| {
                    resp[[i, a]]
                        .partial_cmp(&resp[[i, b]])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                })
                .expect("k >= 1") as i64
        })
        .collect();
    (labels, converged)
}

/// Cholesky factor with escalating regularization for near-singular fits.
fn factor(mut cov: Array2<f64>) -> (Array2<f64>, f64) {
    let m = cov.nrows();
    let mut reg = COVARIANCE_REG;
    loop {
        if let Some(l) = cholesky(&cov) {
            let logdet = cholesky_log_det(&l);
            return (l, logdet);
        }
        reg *= 10.0;
        for a in 0..m {
            cov[[a, a]] += reg;
        }
        assert!(reg < 1e6, "covariance regularization runaway");
    }
}

fn log_gaussian(
    x: &Array2<f64>,
    i: usize,
    means: &Array2<f64>,
    c: usize,
    l: &Array2<f64>,
    logdet: f64,
) -> f64 {
    let m = x.ncols();
    let diff = Array1::from_iter((0..m).map(|j| x[[i, j]] - means[[c, j]]));
    let solved = cholesky_solve(l, &diff);
    let quad: f64 = diff.iter().zip(solved.iter()).map(|(a, b)| a * b).sum();
    -0.5 * (m as f64 * LN_2PI + logdet + quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mixtures_separate_two_blobs() {
        let x = array![
            [0.0, 0.0],
            [0.05, 0.01],
            [0.01, 0.04],
            [0.03, 0.02],
            [1.0, 1.0],
            [1.05, 1.01],
            [1.01, 1.04],
            [1.03, 1.02]
        ];
        for cov in [Covariance::Full, Covariance::Tied, Covariance::Diagonal] {
            let (labels, _) = gaussian_mixture(&x, 2, cov, 5);
            assert_eq!(labels[0], labels[1], "{cov:?} {labels:?}");
            assert_eq!(labels[1], labels[2], "{cov:?} {labels:?}");
            assert_eq!(labels[4], labels[5], "{cov:?} {labels:?}");
            assert_eq!(labels[5], labels[6], "{cov:?} {labels:?}");
            assert_ne!(labels[0], labels[4], "{cov:?} {labels:?}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = array![
            [0.0, 0.0],
            [0.05, 0.01],
            [1.0, 1.0],
            [1.05, 1.01],
            [0.5, 0.5],
            [0.55, 0.51]
        ];
        let (a, _) = gaussian_mixture(&x, 3, Covariance::Diagonal, 99);
        let (b, _) = gaussian_mixture(&x, 3, Covariance::Diagonal, 99);
        assert_eq!(a, b);
    }
}
