//! The comparison systems: popularity ranking and the two predefined
//! meta-feature families (distance-based and correlation-and-distance).
//!
//! The popularity baseline counts how often each algorithm was the best
//! performer and serves that fixed ranking for any new dataset. The
//! distance and CaD vectors feed the same ranking meta-model as the
//! graph embeddings, differing only in the features.

use thiserror::Error;

use crate::ingest::NumericDataset;
use crate::linalg::pairwise_distances;
use crate::perf::{Measure, PerformanceTable};
use crate::zoo::AlgorithmId;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("dataset has {0} instances; at least 2 required")]
    TooFewInstances(usize),
    #[error("dataset has {0} features; at least 2 required for correlations")]
    TooFewFeatures(usize),
    #[error("meta-features need a non-empty vector")]
    EmptyVector,
}

/// Algorithms ordered by how often each achieved the best performance
/// under one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityVector {
    pub measure: String,
    /// (algorithm name, top count), sorted by count descending; ties keep
    /// the listed order of the algorithm universe.
    pub entries: Vec<(String, usize)>,
}

impl PopularityVector {
    /// Builds the ranked vector from per-algorithm top counts. The input
    /// order is the tie-break order (the algorithm universe's ordinals).
    pub fn from_counts(measure: &str, counts: &[(String, usize)]) -> PopularityVector {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| counts[b].1.cmp(&counts[a].1).then(a.cmp(&b)));
        PopularityVector {
            measure: measure.to_string(),
            entries: order.into_iter().map(|i| counts[i].clone()).collect(),
        }
    }

    /// The ranked algorithm names, most popular first.
    pub fn ranked_names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// Counts each algorithm's wins in the table and ranks by count; ties
/// keep ordinal order.
pub fn popularity_rank(table: &PerformanceTable) -> PopularityVector {
    let counts: Vec<(String, usize)> = table
        .algorithms
        .iter()
        .map(|a| {
            (
                a.name().to_string(),
                table.best.iter().filter(|b| *b == a).count(),
            )
        })
        .collect();
    PopularityVector::from_counts(&table.measure.name(), &counts)
}

/// Position-based ranking (1..|A|) implied by a popularity vector over a
/// concrete algorithm universe.
pub fn popularity_ranking(
    vector: &PopularityVector,
    algorithms: &[AlgorithmId],
) -> Vec<AlgorithmId> {
    vector
        .entries
        .iter()
        .filter_map(|(name, _)| algorithms.iter().copied().find(|a| a.name() == *name))
        .collect()
}

/// All n(n-1)/2 pairwise Euclidean distances in (i, j) lexicographic
/// order, min-max normalized to [0, 1]. All-equal distances normalize to
/// all zeros.
pub fn distance_vector(d: &NumericDataset) -> Result<Vec<f64>, BaselineError> {
    if d.n_instances() < 2 {
        return Err(BaselineError::TooFewInstances(d.n_instances()));
    }
    let mut v = pairwise_distances(&d.matrix);
    normalize_unit_interval(&mut v);
    Ok(v)
}

fn normalize_unit_interval(v: &mut [f64]) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        for x in v.iter_mut() {
            *x = (*x - min) / (max - min);
        }
    } else {
        for x in v.iter_mut() {
            *x = 0.0;
        }
    }
}

/// The 19 meta-features of a normalized vector: moments, interval
/// occupancy percentages, and absolute z-score band percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatureVector19 {
    pub values: [f64; 19],
}

pub const META_FEATURE_NAMES: [&str; 19] = [
    "mean",
    "variance",
    "std_dev",
    "skewness",
    "kurtosis",
    "pct_0.0_0.1",
    "pct_0.1_0.2",
    "pct_0.2_0.3",
    "pct_0.3_0.4",
    "pct_0.4_0.5",
    "pct_0.5_0.6",
    "pct_0.6_0.7",
    "pct_0.7_0.8",
    "pct_0.8_0.9",
    "pct_0.9_1.0",
    "pct_z_0_1",
    "pct_z_1_2",
    "pct_z_2_3",
    "pct_z_3_inf",
];

/// Computes MF1..MF19 for a vector with entries in [0, 1].
///
/// Variance and standard deviation use the sample (n-1) convention;
/// skewness and kurtosis are standardized moments with the sample
/// standard deviation, kurtosis plain (not excess). A zero-variance
/// vector gets skewness and kurtosis 0 and all z-scores in the first
/// band. The first interval is closed [0, 0.1]; the rest are half-open
/// (lo, hi].
pub fn meta_features_19(v: &[f64]) -> Result<MetaFeatureVector19, BaselineError> {
    if v.is_empty() {
        return Err(BaselineError::EmptyVector);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let all_equal = v.iter().all(|x| *x == v[0]);
    let (variance, std_dev) = if v.len() == 1 || all_equal {
        (0.0, 0.0)
    } else {
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (var, var.sqrt())
    };
    let (skewness, kurtosis) = if std_dev == 0.0 {
        (0.0, 0.0)
    } else {
        let m3 = v.iter().map(|x| ((x - mean) / std_dev).powi(3)).sum::<f64>() / n;
        let m4 = v.iter().map(|x| ((x - mean) / std_dev).powi(4)).sum::<f64>() / n;
        (m3, m4)
    };

    let mut interval_counts = [0usize; 10];
    for &x in v {
        let bucket = if x <= 0.1 {
            0
        } else {
            // (0.1,0.2] -> 1, ..., (0.9,1] -> 9; ceil of x*10 minus 1
            (((x * 10.0).ceil() as usize).clamp(1, 10)) - 1
        };
        interval_counts[bucket] += 1;
    }

    let mut z_counts = [0usize; 4];
    for &x in v {
        let z = if std_dev == 0.0 {
            0.0
        } else {
            ((x - mean) / std_dev).abs()
        };
        let band = if z < 1.0 {
            0
        } else if z < 2.0 {
            1
        } else if z < 3.0 {
            2
        } else {
            3
        };
        z_counts[band] += 1;
    }

    let mut values = [0.0f64; 19];
    values[0] = mean;
    values[1] = variance;
    values[2] = std_dev;
    values[3] = skewness;
    values[4] = kurtosis;
    // percentages, with the last occupied bucket absorbing the
    // summation residual so each band group sums to exactly 100.0.
    // Later buckets are exactly 0.0 and add without rounding, so the
    // left-to-right sum involves a single controllable rounding; a
    // 1-ulp walk on the balancing bucket therefore cannot skip 100.
    let percentages = |counts: &[usize], out: &mut [f64]| {
        for (slot, &c) in out.iter_mut().zip(counts) {
            *slot = 100.0 * c as f64 / n;
        }
        let balance = counts
            .iter()
            .rposition(|&c| c > 0)
            .expect("counts cover all values");
        let prefix: f64 = out[..balance].iter().sum();
        let mut x = 100.0 - prefix;
        for _ in 0..64 {
            if prefix + x == 100.0 {
                out[balance] = x;
                return;
            }
            let bits = x.to_bits();
            x = f64::from_bits(if prefix + x < 100.0 { bits + 1 } else { bits - 1 });
        }
        unreachable!("residual walk did not converge");
    };
    percentages(&interval_counts, &mut values[5..15]);
    percentages(&z_counts, &mut values[15..19]);
    Ok(MetaFeatureVector19 { values })
}

/// Spearman rank correlation between two equally long value lists;
/// average ranks on ties. A constant list yields correlation 0.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        let da = ra[i] - ma;
        let db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Fractional average ranks of a value list (1 = smallest).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut ranks = vec![0.0; n];
    let mut pos = 0usize;
    while pos < n {
        let v = values[order[pos]];
        let mut end = pos;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        let avg = ((pos + 1) + end) as f64 / 2.0;
        for &i in &order[pos..end] {
            ranks[i] = avg;
        }
        pos = end;
    }
    ranks
}

/// The CaD vector: pairwise Euclidean distances concatenated with
/// pairwise Spearman correlations between instance rows (same pair
/// order), then jointly min-max normalized.
pub fn cad_vector(d: &NumericDataset) -> Result<Vec<f64>, BaselineError> {
    let n = d.n_instances();
    if n < 2 {
        return Err(BaselineError::TooFewInstances(n));
    }
    if d.n_features() < 2 {
        return Err(BaselineError::TooFewFeatures(d.n_features()));
    }
    let mut joint = pairwise_distances(&d.matrix);
    for i in 0..n {
        for j in (i + 1)..n {
            let row_i: Vec<f64> = d.matrix.row(i).to_vec();
            let row_j: Vec<f64> = d.matrix.row(j).to_vec();
            joint.push(spearman(&row_i, &row_j));
        }
    }
    normalize_unit_interval(&mut joint);
    Ok(joint)
}

/// Convenience: the 19 meta-features of the distance vector.
pub fn distance_meta_features(d: &NumericDataset) -> Result<MetaFeatureVector19, BaselineError> {
    meta_features_19(&distance_vector(d)?)
}

/// Convenience: the 19 meta-features of the CaD vector.
pub fn cad_meta_features(d: &NumericDataset) -> Result<MetaFeatureVector19, BaselineError> {
    meta_features_19(&cad_vector(d)?)
}

/// Which measure a popularity vector belongs to, for keyed storage.
pub fn popularity_key(measure: Measure) -> String {
    format!("popularity/{}", measure.name())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(m: ndarray::Array2<f64>) -> NumericDataset {
        NumericDataset::from_matrix("t", m)
    }

    #[test]
    fn popularity_sorts_by_count() {
        let counts = vec![
            ("KM".to_string(), 5),
            ("SL".to_string(), 3),
            ("AL".to_string(), 2),
        ];
        let v = PopularityVector::from_counts("dunn", &counts);
        assert_eq!(v.ranked_names(), vec!["KM", "SL", "AL"]);
    }

    #[test]
    fn popularity_ties_keep_input_order() {
        let counts = vec![
            ("MST".to_string(), 0),
            ("SL".to_string(), 4),
            ("AL".to_string(), 4),
            ("CL".to_string(), 0),
        ];
        let v = PopularityVector::from_counts("dunn", &counts);
        assert_eq!(v.ranked_names(), vec!["SL", "AL", "MST", "CL"]);
    }

    #[test]
    fn distance_vector_normalizes() {
        // 1-D points {0,1,2}: pairs (0,1),(0,2),(1,2) give raw [1,2,1],
        // min-max normalized to [0,1,0]
        let d = ds(array![[0.0], [1.0], [2.0]]);
        assert_eq!(distance_vector(&d).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn distance_vector_degenerate_cases() {
        let two = ds(array![[0.0], [5.0]]);
        assert_eq!(distance_vector(&two).unwrap(), vec![0.0]);
        let dup = ds(array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        assert_eq!(distance_vector(&dup).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn meta_features_small_example() {
        let v = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mf = meta_features_19(&v).unwrap().values;
        assert!((mf[0] - 0.5).abs() < 1e-15);
        assert_eq!(mf[5], 20.0); // only 0.0 in [0, 0.1]
        assert_eq!(mf[7], 20.0); // 0.25 in (0.2, 0.3]
        assert_eq!(mf[9], 20.0); // 0.5 in (0.4, 0.5]
        assert_eq!(mf[12], 20.0); // 0.75 in (0.7, 0.8]
        assert_eq!(mf[14], 20.0); // 1.0 in (0.9, 1.0]
        // symmetric vector: zero skewness
        assert!(mf[3].abs() < 1e-12);
    }

    #[test]
    fn meta_features_zero_variance_convention() {
        let v = [0.4; 8];
        let mf = meta_features_19(&v).unwrap().values;
        assert_eq!(mf[1], 0.0);
        assert_eq!(mf[2], 0.0);
        assert_eq!(mf[3], 0.0);
        assert_eq!(mf[4], 0.0);
        assert_eq!(mf[15], 100.0);
        assert_eq!(mf[16], 0.0);
        assert_eq!(mf[17], 0.0);
        assert_eq!(mf[18], 0.0);
    }

    #[test]
    fn interval_percentages_sum_to_100() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..200);
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mf = meta_features_19(&v).unwrap().values;
            let intervals: f64 = mf[5..15].iter().sum();
            let zbands: f64 = mf[15..19].iter().sum();
            assert!((intervals - 100.0).abs() < 1e-9);
            assert!((zbands - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // constant row convention
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn spearman_invariant_under_monotone_transform() {
        let a = [0.3, 0.9, 0.1, 0.5, 0.7];
        let b = [2.0, 3.0, 1.0, 9.0, 4.0];
        let base = spearman(&a, &b);
        let ta: Vec<f64> = a.iter().map(|x| (x * 3.0).exp()).collect();
        let tb: Vec<f64> = b.iter().map(|x| x.powi(3)).collect();
        assert!((spearman(&ta, &tb) - base).abs() < 1e-12);
    }

    #[test]
    fn cad_concatenates_and_normalizes_jointly() {
        let d = ds(array![[1.0, 2.0, 3.0], [10.0, 20.0, 30.0], [3.0, 2.0, 1.0]]);
        let v = cad_vector(&d).unwrap();
        // 3 distances + 3 correlations
        assert_eq!(v.len(), 6);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, 0.0);
        assert_eq!(max, 1.0);
        // monotone rows correlate at 1; reversed rows at -1; joint
        // normalization maps the global extremes
        let raw_corrs = [
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]),
            spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]),
            spearman(&[10.0, 20.0, 30.0], &[3.0, 2.0, 1.0]),
        ];
        assert!((raw_corrs[0] - 1.0).abs() < 1e-12);
        assert!((raw_corrs[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cad_requires_two_features() {
        let d = ds(array![[1.0], [2.0]]);
        assert!(matches!(
            cad_vector(&d),
            Err(BaselineError::TooFewFeatures(1))
        ));
    }
}
