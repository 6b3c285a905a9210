//! PCA and similarity-graph contract tests.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clustrec_core::graph::{build_similarity_graph, pca_reduce, ReducedDataset};
use clustrec_core::ingest::NumericDataset;

fn ds(matrix: Array2<f64>) -> NumericDataset {
    NumericDataset::from_matrix("t", matrix)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Isotropic 2-D Gaussian: each component carries about half the
/// variance, so one component cannot reach a 0.90 target.
///
/// The oracle side diagonalizes the 2x2 covariance in closed form.
#[test]
fn isotropic_gaussian_needs_both_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 400;
    let mut m = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        m[[i, 0]] = gauss(&mut rng);
        m[[i, 1]] = gauss(&mut rng);
    }
    let d = ds(m.clone());

    // closed-form eigenvalues of the 2x2 sample covariance
    let mean0 = m.column(0).sum() / n as f64;
    let mean1 = m.column(1).sum() / n as f64;
    let mut cxx = 0.0;
    let mut cyy = 0.0;
    let mut cxy = 0.0;
    for i in 0..n {
        let dx = m[[i, 0]] - mean0;
        let dy = m[[i, 1]] - mean1;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    cxx /= n as f64 - 1.0;
    cyy /= n as f64 - 1.0;
    cxy /= n as f64 - 1.0;
    let tr = cxx + cyy;
    let det = cxx * cyy - cxy * cxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = tr / 2.0 - disc;
    let top_fraction = l1 / (l1 + l2);
    assert!(
        top_fraction < 0.90,
        "isotropic sample must not be note-rank-1: {top_fraction}"
    );

    let r = pca_reduce(&d, 0.90, true);
    assert_eq!(r.matrix.ncols(), 2);
    assert!((r.explained_variance[0] - top_fraction).abs() < 1e-9);
}

#[test]
fn distance_preservation_at_full_variance_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 40;
    let m = 7;
    let mut x = Array2::<f64>::zeros((n, m));
    for v in x.iter_mut() {
        *v = rng.random::<f64>() * 3.0;
    }
    let d = ds(x.clone());
    let r = pca_reduce(&d, 1.0, true);

    for i in 0..n {
        for j in (i + 1)..n {
            let orig: f64 = (0..m)
                .map(|c| (x[[i, c]] - x[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            let red: f64 = (0..r.matrix.ncols())
                .map(|c| (r.matrix[[i, c]] - r.matrix[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(
                (orig - red).abs() < 1e-8,
                "pair ({i},{j}): {orig} vs {red}"
            );
        }
    }
}

#[test]
fn reconstruction_error_non_increasing_in_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 25;
    let m = 6;
    let mut x = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        // correlated features so the spectrum decays
        let base = rng.random::<f64>() * 2.0;
        for j in 0..m {
            x[[i, j]] = base * (j as f64 + 1.0) + gauss(&mut rng) * 0.3;
        }
    }
    let d = ds(x.clone());
    let full = pca_reduce(&d, 1.0, true);
    let q_max = full.matrix.ncols();

    let mut prev = f64::INFINITY;
    for q in 1..=q_max {
        // reconstruct from the first q components
        let mut err = 0.0;
        for i in 0..n {
            for j in 0..m {
                let mut recon = full.mean_vector[j];
                for c in 0..q {
                    recon += full.matrix[[i, c]] * full.components[[j, c]];
                }
                err += (x[[i, j]] - recon).powi(2);
            }
        }
        assert!(err <= prev + 1e-9, "q={q}: {err} > {prev}");
        prev = err;
    }
    assert!(prev < 1e-16, "full reconstruction must be exact");
}

#[test]
fn explained_variance_is_non_increasing_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut x = Array2::<f64>::zeros((30, 5));
    for v in x.iter_mut() {
        *v = rng.random::<f64>();
    }
    let r = pca_reduce(&ds(x), 1.0, true);
    let mut sum = 0.0;
    for w in r.explained_variance.windows(2) {
        assert!(w[0] >= w[1] - 1e-12);
    }
    for &f in &r.explained_variance {
        assert!((0.0..=1.0 + 1e-9).contains(&f));
        sum += f;
    }
    assert!(sum <= 1.0 + 1e-9);
}

#[test]
fn gram_route_matches_covariance_route() {
    // wide matrix (m > n) exercises the Gram-side decomposition; its
    // scores must preserve distances exactly like the covariance side.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 8;
    let m = 20;
    let mut x = Array2::<f64>::zeros((n, m));
    for v in x.iter_mut() {
        *v = rng.random::<f64>();
    }
    let d = ds(x.clone());
    let r = pca_reduce(&d, 1.0, true);
    assert!(r.matrix.ncols() <= n);
    for i in 0..n {
        for j in (i + 1)..n {
            let orig: f64 = (0..m)
                .map(|c| (x[[i, c]] - x[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            let red: f64 = (0..r.matrix.ncols())
                .map(|c| (r.matrix[[i, c]] - r.matrix[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((orig - red).abs() < 1e-8);
        }
    }
}

fn reduced_from_rows(rows: Vec<Vec<f64>>) -> ReducedDataset {
    let n = rows.len();
    let m = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    ReducedDataset {
        matrix: Array2::from_shape_vec((n, m), flat).unwrap(),
        explained_variance: vec![1.0],
        mean_vector: vec![0.0; m],
        components: Array2::eye(m),
        pca_applied: true,
    }
}

#[test]
fn threshold_filter_keeps_only_strong_edges() {
    // three unit vectors at angles 0, acos(0.95), acos(0.95)+acos(0.91):
    // s(0,1)=0.95, s(1,2)=0.91, s(0,2) well below 0.9
    let a1 = 0.0f64;
    let a2 = 0.95f64.acos();
    let a3 = a2 + 0.91f64.acos();
    let r = reduced_from_rows(vec![
        vec![a1.cos(), a1.sin()],
        vec![a2.cos(), a2.sin()],
        vec![a3.cos(), a3.sin()],
    ]);
    let g = build_similarity_graph(&r, 0.9);
    assert_eq!(g.edge_count(), 2);
    assert_eq!(g.edges[0].0, 0);
    assert_eq!(g.edges[0].1, 1);
    assert!((g.edges[0].2 - 0.95).abs() < 1e-12);
    assert_eq!(g.edges[1].0, 1);
    assert_eq!(g.edges[1].1, 2);
    assert!((g.edges[1].2 - 0.91).abs() < 1e-12);
}

#[test]
fn all_below_threshold_gives_edgeless_graph() {
    let r = reduced_from_rows(vec![
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 0.5],
    ]);
    let g = build_similarity_graph(&r, 0.9);
    assert_eq!(g.edge_count(), 0);
    assert_eq!(g.node_count, 3);
}

#[test]
fn duplicate_instances_get_unit_weight() {
    let r = reduced_from_rows(vec![
        vec![0.3, 0.7],
        vec![0.3, 0.7],
        vec![-5.0, 2.0],
    ]);
    let g = build_similarity_graph(&r, 0.9);
    assert_eq!(g.edge_count(), 1);
    let (i, j, w) = g.edges[0];
    assert_eq!((i, j), (0, 1));
    assert!((w - 1.0).abs() < 1e-12);
    assert!(w <= 1.0 + 1e-9);
}

#[test]
fn graph_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut rows = Vec::new();
    for _ in 0..25 {
        rows.push(vec![
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ]);
    }
    let g = build_similarity_graph(&reduced_from_rows(rows), 0.5);
    let z = g.adjacency_matrix();
    for i in 0..25 {
        assert_eq!(z[[i, i]], 0.0);
        for j in 0..25 {
            assert_eq!(z[[i, j]], z[[j, i]]);
        }
    }
}

#[test]
fn raising_threshold_never_adds_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut rows = Vec::new();
    for _ in 0..30 {
        rows.push(vec![rng.random::<f64>(), rng.random::<f64>()]);
    }
    let r = reduced_from_rows(rows);
    let loose = build_similarity_graph(&r, 0.5);
    let tight = build_similarity_graph(&r, 0.8);
    let loose_set: std::collections::BTreeSet<(usize, usize)> =
        loose.edges.iter().map(|&(i, j, _)| (i, j)).collect();
    for &(i, j, _) in &tight.edges {
        assert!(loose_set.contains(&(i, j)));
    }
    assert!(tight.edge_count() <= loose.edge_count());
}

#[test]
fn pca_disabled_still_builds_a_graph() {
    let d = ds(Array2::from_shape_vec((4, 2), vec![0.9, 0.8, 0.89, 0.81, 0.1, 0.9, 0.2, 0.85]).unwrap());
    let r = pca_reduce(&d, 0.9, false);
    let g = build_similarity_graph(&r, 0.9);
    assert_eq!(g.node_count, 4);
    // raw coordinates are all positive so similar rows connect
    assert!(g.edge_count() >= 1);
}
