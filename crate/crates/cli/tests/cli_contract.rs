//! Binary-level contract tests: subcommands, exit codes, and output
//! plumbing.

use std::path::Path;
use std::process::Command;

use clustrec_core::synth::generate_corpus;

fn clustrec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clustrec"))
}

fn base_args(corpus: &Path, output: &Path) -> Vec<String> {
    [
        "--corpus",
        &corpus.display().to_string(),
        "--output",
        &output.display().to_string(),
        "--measures",
        "silhouette",
        "--algorithms",
        "KM,SL,DBSCAN",
        "--set",
        "repeats=2",
        "--set",
        "k_max=5",
        "--set",
        "embedding_size=50",
        "--set",
        "gcn_layers=2",
        "--set",
        "deepwalk_dim=16",
        "--set",
        "deepwalk_epochs=2",
        "--set",
        "deepwalk_num_walks=4",
        "--set",
        "ranker_trees=30",
        "--master-seed",
        "5",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn evaluate_train_recommend_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let output = dir.path().join("out");
    generate_corpus(&corpus, 6, 3).unwrap();
    let new = dir.path().join("new");
    let new_paths = generate_corpus(&new, 1, 77).unwrap();

    let status = clustrec()
        .args(base_args(&corpus, &output))
        .arg("evaluate")
        .status()
        .unwrap();
    assert!(status.success());

    let status = clustrec()
        .args(base_args(&corpus, &output))
        .arg("train")
        .status()
        .unwrap();
    assert!(status.success());

    let out = clustrec()
        .args(base_args(&corpus, &output))
        .args([
            "recommend",
            &new_paths[0].display().to_string(),
            "--measure",
            "silhouette",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rank\talgorithm\tscore"));
    // all three configured algorithms appear exactly once
    for name in ["KM", "SL", "DBSCAN"] {
        assert_eq!(stdout.matches(&format!("\t{name}\t")).count(), 1);
    }
}

#[test]
fn store_ls_and_rm() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let output = dir.path().join("out");
    generate_corpus(&corpus, 3, 9).unwrap();

    clustrec()
        .args(base_args(&corpus, &output))
        .arg("evaluate")
        .status()
        .unwrap();
    let out = clustrec()
        .args(base_args(&corpus, &output))
        .args(["store", "ls"])
        .output()
        .unwrap();
    let listing = String::from_utf8_lossy(&out.stdout);
    assert!(listing.contains("perf_table/silhouette/"));

    let out = clustrec()
        .args(base_args(&corpus, &output))
        .args(["store", "rm", "perf_table"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("removed 1"));
}

#[test]
fn store_env_var_overrides_root() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let output = dir.path().join("out");
    let env_store = dir.path().join("envstore");
    generate_corpus(&corpus, 3, 9).unwrap();

    clustrec()
        .args(base_args(&corpus, &output))
        .arg("evaluate")
        .env("CLUSTREC_STORE", &env_store)
        .status()
        .unwrap();
    assert!(env_store.join("perf_table").exists());
    assert!(!output.join("store").exists());
}

#[test]
fn exit_codes_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let output = dir.path().join("out");
    generate_corpus(&corpus, 3, 9).unwrap();

    // 1: config error
    let status = clustrec()
        .args(base_args(&corpus, &output))
        .args(["--set", "graph_threshold=1.5", "evaluate"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // 2: data error (missing corpus)
    let status = clustrec()
        .args(base_args(&dir.path().join("nowhere"), &output))
        .arg("evaluate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // 2: missing model for recommend
    let new = dir.path().join("new");
    let new_paths = generate_corpus(&new, 1, 4).unwrap();
    let out = clustrec()
        .args(base_args(&corpus, &output))
        .args([
            "recommend",
            &new_paths[0].display().to_string(),
            "--measure",
            "silhouette",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clustrec train"));

    // 0: success
    let status = clustrec()
        .args(base_args(&corpus, &output))
        .arg("evaluate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}
