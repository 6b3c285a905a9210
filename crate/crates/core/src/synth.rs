//! Synthetic corpus generation: three structural regimes with known
//! best-algorithm tendencies, used by the benchmark suite and for smoke
//! testing the pipeline at desk scale.
//!
//! Values are quantized to three decimals (sensor-style precision) and
//! every dataset repeats its first row once, so preprocessing never
//! mistakes a real feature for an identifier column.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::seeding::derive_seed;

/// The structural family a synthetic dataset is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Well-separated isotropic Gaussian blobs.
    SeparatedBlobs,
    /// Elongated chains: thin, stretched clusters with clear gaps.
    ElongatedChains,
    /// Dense blobs plus a uniform noise background.
    NoisyDensity,
}

pub const ALL_REGIMES: [Regime; 3] = [
    Regime::SeparatedBlobs,
    Regime::ElongatedChains,
    Regime::NoisyDensity,
];

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::SeparatedBlobs => "blobs",
            Regime::ElongatedChains => "chains",
            Regime::NoisyDensity => "noisy",
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn quantize(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Generates one dataset of the given regime. Deterministic in
/// (master_seed, regime, index).
pub fn generate_dataset(regime: Regime, index: usize, master_seed: u64) -> (String, Array2<f64>) {
    let seed = derive_seed(master_seed, &["synth", regime.name(), &index.to_string()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = format!("{}_{:02}", regime.name(), index);

    let points: Vec<Vec<f64>> = match regime {
        Regime::SeparatedBlobs => {
            let k = 2 + index % 3; // 2..4 blobs
            let dims = 2 + index % 2;
            let per = 24 + (index * 7) % 12;
            let mut centers = Vec::new();
            for c in 0..k {
                let angle = c as f64 / k as f64 * std::f64::consts::TAU
                    + rng.random::<f64>() * 0.3;
                let radius = 8.0 + rng.random::<f64>() * 2.0;
                let mut center = vec![radius * angle.cos(), radius * angle.sin()];
                for _ in 2..dims {
                    center.push(rng.random::<f64>() * 4.0 - 2.0);
                }
                centers.push(center);
            }
            let mut pts = Vec::new();
            for center in &centers {
                for _ in 0..per {
                    pts.push(
                        center
                            .iter()
                            .map(|&c| c + gauss(&mut rng) * 0.7)
                            .collect(),
                    );
                }
            }
            pts
        }
        Regime::ElongatedChains => {
            let chains = 2 + index % 2; // 2..3 chains
            let per = 36 + (index * 5) % 10;
            let mut pts = Vec::new();
            for c in 0..chains {
                // parallel line segments, offset far apart relative to
                // the point step, with small perpendicular jitter
                let offset = c as f64 * 6.0;
                let slope = 0.3 + 0.2 * c as f64;
                for p in 0..per {
                    let t = p as f64 / per as f64 * 20.0;
                    pts.push(vec![
                        t + gauss(&mut rng) * 0.05,
                        offset + slope * t + gauss(&mut rng) * 0.05,
                    ]);
                }
            }
            pts
        }
        Regime::NoisyDensity => {
            let k = 2 + index % 2; // 2..3 dense cores
            let per = 28 + (index * 3) % 8;
            let noise = (per * k) / 5; // ~20% background
            let mut pts = Vec::new();
            for c in 0..k {
                let cx = c as f64 * 10.0;
                let cy = (c % 2) as f64 * 8.0;
                for _ in 0..per {
                    pts.push(vec![
                        cx + gauss(&mut rng) * 0.4,
                        cy + gauss(&mut rng) * 0.4,
                    ]);
                }
            }
            for _ in 0..noise {
                pts.push(vec![
                    rng.random::<f64>() * 20.0 - 5.0,
                    rng.random::<f64>() * 18.0 - 5.0,
                ]);
            }
            pts
        }
    };

    let mut rows: Vec<Vec<f64>> = points
        .into_iter()
        .map(|p| p.into_iter().map(quantize).collect())
        .collect();
    // repeat the first row so no column is all-distinct
    rows.push(rows[0].clone());

    let m = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    (
        name,
        Array2::from_shape_vec((rows.len(), m), flat).expect("rectangular"),
    )
}

/// Writes `count` datasets round-robin across the three regimes as CSV
/// files under `dir`; returns the paths in generation order.
pub fn generate_corpus(
    dir: &Path,
    count: usize,
    master_seed: u64,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let regime = ALL_REGIMES[i % ALL_REGIMES.len()];
        let (name, matrix) = generate_dataset(regime, i / ALL_REGIMES.len(), master_seed);
        let path = dir.join(format!("{name}.csv"));
        let mut text = String::new();
        for j in 0..matrix.ncols() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format!("f{j}"));
        }
        text.push('\n');
        for i in 0..matrix.nrows() {
            for j in 0..matrix.ncols() {
                if j > 0 {
                    text.push(',');
                }
                text.push_str(&format!("{:.3}", matrix[[i, j]]));
            }
            text.push('\n');
        }
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_csv, preprocess};

    #[test]
    fn datasets_are_deterministic() {
        let (n1, m1) = generate_dataset(Regime::SeparatedBlobs, 0, 7);
        let (n2, m2) = generate_dataset(Regime::SeparatedBlobs, 0, 7);
        assert_eq!(n1, n2);
        assert_eq!(m1, m2);
        let (_, m3) = generate_dataset(Regime::SeparatedBlobs, 0, 8);
        assert_ne!(m1, m3);
    }

    #[test]
    fn corpus_roundtrips_through_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let paths = generate_corpus(dir.path(), 6, 42).unwrap();
        assert_eq!(paths.len(), 6);
        for path in paths {
            let raw = load_csv(&path, None).unwrap();
            let ds = preprocess(&raw).unwrap();
            assert!(ds.n_instances() >= 40, "{}", ds.name);
            assert!(ds.n_features() >= 1);
        }
    }

    #[test]
    fn every_regime_appears() {
        let dir = tempfile::tempdir().unwrap();
        let paths = generate_corpus(dir.path(), 9, 1).unwrap();
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for regime in ["blobs", "chains", "noisy"] {
            assert_eq!(names.iter().filter(|n| n.starts_with(regime)).count(), 3);
        }
    }
}
