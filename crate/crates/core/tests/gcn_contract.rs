//! GCN contract tests: analytic gradients against central finite
//! differences, node-permutation invariance, the spectral bound of the
//! normalized adjacency, and end-to-end separability training.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clustrec_core::gcn::{
    accuracy, embed_all, normalize_adjacency, train, GcnConfig, GcnModel, LabeledGraph,
};
use clustrec_core::linalg::sym_eigen;
use clustrec_core::zoo::AlgorithmId;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, input_dim: usize, label: AlgorithmId) -> LabeledGraph {
    let mut z = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.4 {
                let w = 0.9 + rng.random::<f64>() * 0.1;
                z[[i, j]] = w;
                z[[j, i]] = w;
            }
        }
    }
    let mut x = Array2::<f64>::zeros((n, input_dim));
    for v in x.iter_mut() {
        *v = rng.random::<f64>() * 2.0 - 1.0;
    }
    LabeledGraph::new(&format!("g{n}"), z, x, label)
}

/// Central finite differences vs analytic gradients for every parameter
/// tensor on 20 random small graphs.
#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;

    for case in 0..20 {
        let n = 3 + (case % 10); // up to 12 nodes
        let config = GcnConfig {
            layers: 2 + case % 3,
            input_dim: 4,
            embedding_dim: 5,
            classes: 3,
            seed: case as u64,
            ..GcnConfig::default()
        };
        let label = AlgorithmId::from_ordinal(case % 3).unwrap();
        let graphs = vec![random_graph(&mut rng, n, 4, label)];

        let mut model = GcnModel::init(&config);
        let (_, grads) = model.loss_and_gradients(&graphs).unwrap();

        let mut max_rel = 0.0f64;
        for p in 0..model.param_count() {
            let orig = model.get_param(p);
            model.set_param(p, orig + h);
            let plus = model.loss(&graphs).unwrap();
            model.set_param(p, orig - h);
            let minus = model.loss(&graphs).unwrap();
            model.set_param(p, orig);
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.get_param(p);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
        }
        assert!(
            max_rel < 1e-4,
            "case {case}: max relative gradient error {max_rel}"
        );
    }
}

/// Permuting node order permutes the final node representations
/// identically and leaves the embedding and logits unchanged.
#[test]
fn node_permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..100 {
        let n = 3 + case % 9;
        let config = GcnConfig {
            layers: 2 + case % 2,
            input_dim: 5,
            embedding_dim: 6,
            classes: 3,
            seed: case as u64,
            ..GcnConfig::default()
        };
        let model = GcnModel::init(&config);
        let g = random_graph(&mut rng, n, 5, AlgorithmId::Mst);

        // random permutation of 0..n
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let mut z_p = Array2::<f64>::zeros((n, n));
        let mut x_p = Array2::<f64>::zeros((n, 5));
        for i in 0..n {
            for j in 0..n {
                z_p[[perm[i], perm[j]]] = g.z[[i, j]];
            }
            for c in 0..5 {
                x_p[[perm[i], c]] = g.x[[i, c]];
            }
        }
        let g_p = LabeledGraph::new("perm", z_p, x_p, AlgorithmId::Mst);

        let f1 = model.forward(&g).unwrap();
        let f2 = model.forward(&g_p).unwrap();
        for c in 0..config.embedding_dim {
            assert!(
                (f1.embedding[c] - f2.embedding[c]).abs() < 1e-9,
                "case {case}: embedding differs"
            );
        }
        for c in 0..config.classes {
            assert!((f1.logits[c] - f2.logits[c]).abs() < 1e-9);
        }
        for i in 0..n {
            for c in 0..config.embedding_dim {
                assert!(
                    (f1.node_reps[[i, c]] - f2.node_reps[[perm[i], c]]).abs() < 1e-9,
                    "case {case}: node reps must permute with the nodes"
                );
            }
        }
    }
}

/// All eigenvalues of the normalized adjacency lie in [-1, 1].
#[test]
fn normalized_adjacency_spectral_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for case in 0..50 {
        let n = 2 + case % 10;
        let mut z = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.5 {
                    let w = rng.random::<f64>() * 2.0;
                    z[[i, j]] = w;
                    z[[j, i]] = w;
                }
            }
        }
        let f = normalize_adjacency(&z);
        // exactness: F_ij == Z~_ij / sqrt(b_i b_j)
        let mut z_tilde = z.clone();
        for i in 0..n {
            z_tilde[[i, i]] += 1.0;
        }
        let degrees: Vec<f64> = (0..n).map(|i| z_tilde.row(i).sum()).collect();
        for i in 0..n {
            for j in 0..n {
                let expect = z_tilde[[i, j]] / (degrees[i] * degrees[j]).sqrt();
                assert_eq!(f[[i, j]], expect, "entry ({i},{j}) must match exactly");
            }
        }
        let (eigenvalues, _) = sym_eigen(&f);
        for &l in eigenvalues.iter() {
            assert!(
                (-1.0 - 1e-9..=1.0 + 1e-9).contains(&l),
                "case {case}: eigenvalue {l} out of [-1,1]"
            );
        }
    }
}

/// Two structurally separable graph classes (dense cliques vs edgeless)
/// must reach training accuracy 1.0 within the epoch budget.
#[test]
fn separable_classes_reach_full_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut graphs = Vec::new();
    for i in 0..20 {
        let n = 6 + i % 3;
        let clique = i < 10;
        let mut z = Array2::<f64>::zeros((n, n));
        if clique {
            for a in 0..n {
                for b in (a + 1)..n {
                    let w = 0.92 + rng.random::<f64>() * 0.08;
                    z[[a, b]] = w;
                    z[[b, a]] = w;
                }
            }
        }
        let mut x = Array2::<f64>::zeros((n, 8));
        for v in x.iter_mut() {
            *v = rng.random::<f64>();
        }
        graphs.push(LabeledGraph::new(
            &format!("g{i}"),
            z,
            x,
            if clique { AlgorithmId::Km } else { AlgorithmId::Sl },
        ));
    }
    let config = GcnConfig {
        layers: 4,
        input_dim: 8,
        embedding_dim: 16,
        classes: 15,
        learning_rate: 0.006,
        max_epochs: 60,
        patience: 10,
        seed: 3,
    };
    let (model, history) = train(&graphs, &config).unwrap();
    assert!(!history.is_empty() && history.len() <= 60);
    let acc = accuracy(&model, &graphs).unwrap();
    assert_eq!(acc, 1.0, "structural separability must be learnable");
}

/// Early stopping never lets the run continue patience epochs past the
/// last strict improvement.
#[test]
fn patience_bound_holds_on_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    let graphs: Vec<LabeledGraph> = (0..8)
        .map(|i| {
            random_graph(
                &mut rng,
                5 + i % 3,
                4,
                if i % 2 == 0 { AlgorithmId::Km } else { AlgorithmId::Sl },
            )
        })
        .collect();
    for seed in 0..5 {
        let config = GcnConfig {
            layers: 2,
            input_dim: 4,
            embedding_dim: 5,
            classes: 15,
            max_epochs: 60,
            patience: 5,
            seed,
            ..GcnConfig::default()
        };
        let (_, history) = train(&graphs, &config).unwrap();
        // replay the stopping rule over the recorded history
        let mut best = f64::INFINITY;
        let mut stale = 0usize;
        for (e, &loss) in history.iter().enumerate() {
            if loss < best {
                best = loss;
                stale = 0;
            } else {
                stale += 1;
                assert!(
                    stale <= 5,
                    "seed {seed}: {stale} stale epochs at {e} exceed patience"
                );
            }
        }
        if history.len() < 60 {
            assert_eq!(stale, 5, "early exit must be caused by patience");
        }
    }
}

/// The embedding length always equals the configured embedding size.
#[test]
fn embedding_size_matches_config() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for emb in [50, 100, 300] {
        let config = GcnConfig {
            layers: 2,
            input_dim: 4,
            embedding_dim: emb,
            classes: 4,
            ..GcnConfig::default()
        };
        let model = GcnModel::init(&config);
        let g = random_graph(&mut rng, 5, 4, AlgorithmId::Mst);
        let out = embed_all(&model, &[g], "dunn").unwrap();
        assert_eq!(out[0].vector.len(), emb);
        assert_eq!(out[0].measure, "dunn");
    }
}

/// Baseline loss for an untrained model on k balanced classes is ln(k)
/// within noise; training must improve it.
#[test]
fn training_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let graphs: Vec<LabeledGraph> = (0..12)
        .map(|i| {
            let n = 5 + i % 4;
            let clique = i % 2 == 0;
            let mut z = Array2::<f64>::zeros((n, n));
            if clique {
                for a in 0..n {
                    for b in (a + 1)..n {
                        z[[a, b]] = 0.95;
                        z[[b, a]] = 0.95;
                    }
                }
            }
            let mut x = Array2::<f64>::zeros((n, 6));
            for v in x.iter_mut() {
                *v = rng.random::<f64>();
            }
            LabeledGraph::new(
                &format!("g{i}"),
                z,
                x,
                if clique { AlgorithmId::Km } else { AlgorithmId::Sl },
            )
        })
        .collect();
    let config = GcnConfig {
        layers: 3,
        input_dim: 6,
        embedding_dim: 10,
        classes: 15,
        max_epochs: 40,
        seed: 1,
        ..GcnConfig::default()
    };
    let (model, history) = train(&graphs, &config).unwrap();
    let final_loss = model.loss(&graphs).unwrap();
    assert!(final_loss < history[0], "{final_loss} !< {}", history[0]);
}
