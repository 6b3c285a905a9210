//! Nonparametric significance tests: the Wilcoxon signed-rank test with
//! an exact small-sample null distribution, and the chi-square form of
//! the Friedman test.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::baselines::average_ranks;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} non-zero differences; at least 6 required")]
    TooFewPairs(usize),
    #[error("friedman needs >= 3 methods and >= 10 datasets, got {methods} x {datasets}")]
    TooFewSamples { methods: usize, datasets: usize },
}

/// Largest sample size for which the exact Wilcoxon null distribution is
/// enumerated; larger samples use the normal approximation.
pub const WILCOXON_EXACT_LIMIT: usize = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped; ties in |difference| receive average
/// ranks. The statistic is min(W+, W-). For n <= 25 the p-value comes
/// from the exact sign-assignment distribution (a subset-sum count over
/// the observed ranks); above that, from the normal approximation with
/// the tie-corrected variance.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 6 {
        return Err(StatsError::TooFewPairs(n));
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    let p_value = if n <= WILCOXON_EXACT_LIMIT {
        exact_two_sided_p(&ranks, statistic)
    } else {
        // normal approximation with tie correction
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut i = 0usize;
        while i < sorted.len() {
            let mut j = i;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            tie_term += t * t * t - t;
            i = j;
        }
        let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = (statistic - mean) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * normal.cdf(-z.abs())).min(1.0)
    };
    Ok((statistic, p_value))
}

/// Exact two-sided p-value: enumerate the distribution of W+ over all
/// 2^n sign assignments via subset-sum counting on doubled ranks
/// (average ranks are multiples of 0.5).
fn exact_two_sided_p(ranks: &[f64], statistic: f64) -> f64 {
    let scaled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = scaled.iter().sum();
    // ways[s] = number of assignments whose positive-rank sum is s/2
    let mut ways = vec![0.0f64; total + 1];
    ways[0] = 1.0;
    for &r in &scaled {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let count_total = 2f64.powi(ranks.len() as i32);
    let w_scaled = (statistic * 2.0).round() as usize;
    let lower: f64 = ways[..=w_scaled.min(total)].iter().sum();
    // the null distribution of W+ is symmetric about total/2
    (2.0 * lower / count_total).min(1.0)
}

/// Friedman test over a methods x datasets score matrix (chi-square
/// form). Methods are ranked within each dataset with average ranks;
/// larger scores rank higher (direction does not affect the statistic).
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<(f64, f64), StatsError> {
    let k = scores.len();
    let n = if k == 0 { 0 } else { scores[0].len() };
    if k < 3 || n < 10 {
        return Err(StatsError::TooFewSamples {
            methods: k,
            datasets: n,
        });
    }
    for row in scores {
        if row.len() != n {
            return Err(StatsError::LengthMismatch(row.len(), n));
        }
    }

    let mut rank_sums = vec![0.0f64; k];
    for d in 0..n {
        let column: Vec<f64> = (0..k).map(|m| scores[m][d]).collect();
        let ranks = average_ranks(&column);
        for m in 0..k {
            rank_sums[m] += ranks[m];
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let statistic = 12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0);
    let statistic = statistic.max(0.0);

    let chi = ChiSquared::new(kf - 1.0).expect("k >= 3");
    let p_value = 1.0 - chi.cdf(statistic);
    Ok((statistic, p_value))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive oracle: enumerate all 2^n sign assignments directly.
    fn brute_force_two_sided(ranks: &[f64], statistic: f64) -> f64 {
        let n = ranks.len();
        let mut le = 0usize;
        for mask in 0u64..(1 << n) {
            let w_plus: f64 = (0..n)
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            if w_plus <= statistic + 1e-12 {
                le += 1;
            }
        }
        (2.0 * le as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn shifted_sample_is_significant() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let (stat, p) = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(stat, 0.0); // all differences negative
        assert!(p < 0.01, "p = {p}");
        // oracle check: all 10 diffs tie at |d|=1 -> ranks all 5.5
        let ranks = vec![5.5; 10];
        let expect = brute_force_two_sided(&ranks, 0.0);
        assert!((p - expect).abs() < 1e-12);
    }

    #[test]
    fn all_zero_differences_rejected() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let err = wilcoxon_signed_rank(&x, &x).unwrap_err();
        assert!(matches!(err, StatsError::TooFewPairs(0)));
    }

    #[test]
    fn statistic_matches_brute_force_rank_sum() {
        // textbook-style pair set with distinct absolute differences
        let x = vec![125.0, 115.0, 130.0, 140.0, 140.0, 115.0, 140.0, 125.0];
        let y = vec![110.0, 122.0, 125.0, 120.0, 140.0, 124.0, 123.0, 137.0];
        // dropping the zero difference leaves 7 pairs
        let (stat, p) = wilcoxon_signed_rank(&x, &y).unwrap();
        // brute-force: diffs, |d| ranks, min tail sum
        let diffs: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a - b)
            .filter(|d| *d != 0.0)
            .collect();
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let ranks = average_ranks(&abs);
        let wp: f64 = ranks
            .iter()
            .zip(&diffs)
            .filter(|(_, d)| **d > 0.0)
            .map(|(r, _)| r)
            .sum();
        let wm: f64 = ranks.iter().sum::<f64>() - wp;
        assert_eq!(stat, wp.min(wm));
        let expect = brute_force_two_sided(&ranks, stat);
        assert!((p - expect).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let x = vec![1.0, 4.0, 2.5, 7.0, 3.0, 0.5, 9.0, 5.0];
        let y = vec![2.0, 3.0, 2.0, 9.0, 1.0, 1.5, 6.0, 5.5];
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let ranks = average_ranks(&abs);
        let (stat, p) = wilcoxon_signed_rank(&x, &y).unwrap();
        let expect = brute_force_two_sided(&ranks, stat);
        assert!((p - expect).abs() < 1e-12, "{p} vs {expect}");
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + ((i % 5) as f64) * 0.3 + 0.1).collect();
        let (_, p) = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(p > 0.0 && p <= 1.0);
        assert!(p < 0.05, "consistent shift should be detected: {p}");
    }

    #[test]
    fn friedman_identical_methods() {
        let scores = vec![vec![1.0; 12], vec![1.0; 12], vec![1.0; 12]];
        let (stat, p) = friedman_test(&scores).unwrap();
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn friedman_dominant_method_significant() {
        // one method of 4 dominates on every one of 20 datasets
        let n = 20;
        let mut scores = vec![vec![0.0; n]; 4];
        for d in 0..n {
            scores[0][d] = 10.0 + d as f64 * 0.01;
            scores[1][d] = 5.0 + (d % 3) as f64;
            scores[2][d] = 4.0 + (d % 4) as f64;
            scores[3][d] = 3.0 + (d % 2) as f64;
        }
        let (stat, p) = friedman_test(&scores).unwrap();
        // critical value for chi2(3) at 0.01 is 11.34
        assert!(stat > 11.34, "stat = {stat}");
        assert!(p < 0.01);
    }

    #[test]
    fn friedman_statistic_matches_hand_computation() {
        let n = 20;
        let mut scores = vec![vec![0.0; n]; 4];
        for d in 0..n {
            for (m, row) in scores.iter_mut().enumerate() {
                row[d] = ((m * 7 + d * 3) % 11) as f64 + 0.1 * m as f64;
            }
        }
        let (stat, _) = friedman_test(&scores).unwrap();

        // hand computation straight from the rank definition
        let mut rank_sums = [0.0f64; 4];
        for d in 0..n {
            let mut idx: Vec<usize> = (0..4).collect();
            idx.sort_by(|&a, &b| scores[a][d].partial_cmp(&scores[b][d]).unwrap());
            // no ties in this construction by design of the 0.1*m offset
            for (pos, &m) in idx.iter().enumerate() {
                rank_sums[m] += (pos + 1) as f64;
            }
        }
        let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
        let expect = 12.0 / (n as f64 * 4.0 * 5.0) * sum_sq - 3.0 * n as f64 * 5.0;
        assert!((stat - expect).abs() < 1e-10, "{stat} vs {expect}");
    }

    #[test]
    fn friedman_invariant_to_dataset_order() {
        let n = 12;
        let mut scores = vec![vec![0.0; n]; 3];
        for d in 0..n {
            scores[0][d] = (d as f64).sin();
            scores[1][d] = (d as f64).cos();
            scores[2][d] = (d as f64 * 0.5).tan().atan();
        }
        let (stat1, _) = friedman_test(&scores).unwrap();
        let permuted: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.rotate_left(5);
                r.swap(0, 3);
                r
            })
            .collect();
        let (stat2, _) = friedman_test(&permuted).unwrap();
        assert!((stat1 - stat2).abs() < 1e-12);
    }

    #[test]
    fn friedman_rejects_small_designs() {
        assert!(matches!(
            friedman_test(&[vec![1.0; 12], vec![2.0; 12]]),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(matches!(
            friedman_test(&[vec![1.0; 5], vec![2.0; 5], vec![3.0; 5]]),
            Err(StatsError::TooFewSamples { .. })
        ));
    }
}
