//! End-to-end command line tests: a miniature dataset flows through split,
//! sw-matrix, bpe-train, embed-train, tune, train, evaluate, analyze-mss,
//! cluster and report, and error paths map to the documented exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chemlang::synth::{SynthData, SynthParams};

fn chemlang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemlang"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, out_dir: &Path) -> std::path::PathBuf {
    let config = format!(
        r#"{{
  "label": "mini",
  "dataset": {{
    "proteins": "data/proteins.tsv",
    "ligands": "data/ligands.tsv",
    "interactions": "data/interactions.tsv"
  }},
  "recipe": {{
    "protein_mode": "sw_ligand_centric_strong",
    "ligand_mode": "smilesvec",
    "word_scheme": {{"kmer": 1}},
    "strong_threshold": {{"cutoff": 8.0, "direction": "larger_stronger"}}
  }},
  "embedding": {{"path": "data/embedding.txt"}},
  "grid": {{
    "learning_rate": [0.1],
    "rounds": [20],
    "max_depth": [3],
    "lambda": [1.0],
    "gamma": [0.0],
    "min_child_weight": [1.0]
  }},
  "seed": 11,
  "out_dir": {out:?}
}}"#,
        out = out_dir.to_str().unwrap()
    );
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn full_workflow_on_miniature_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let out = dir.path().join("out");
    let synth = SynthData::generate(&SynthParams {
        n_proteins: 12,
        n_clusters: 4,
        n_ligands: 24,
        partners_per_ligand: 6,
        seed: 99,
        ..SynthParams::default()
    })
    .unwrap();
    synth.write_files(&data_dir).unwrap();
    let config = write_config(dir.path(), &out);
    let cfg = config.to_str().unwrap();
    let proteins = data_dir.join("proteins.tsv");
    let ligands = data_dir.join("ligands.tsv");
    let interactions = data_dir.join("interactions.tsv");

    // ingest (validation mode) round-trips the dataset
    let ingest_out = dir.path().join("ingested");
    assert_ok(
        &chemlang(&[
            "--out",
            ingest_out.to_str().unwrap(),
            "ingest",
            "--proteins",
            proteins.to_str().unwrap(),
            "--ligands",
            ligands.to_str().unwrap(),
            "--interactions",
            interactions.to_str().unwrap(),
        ]),
        "ingest",
    );
    assert!(ingest_out.join("interactions.tsv").exists());

    // split
    assert_ok(
        &chemlang(&[
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
            "split",
            "--proteins",
            proteins.to_str().unwrap(),
            "--ligands",
            ligands.to_str().unwrap(),
            "--interactions",
            interactions.to_str().unwrap(),
        ]),
        "split",
    );
    assert!(out.join("folds.json").exists());

    // sw-matrix
    assert_ok(
        &chemlang(&[
            "--out",
            out.to_str().unwrap(),
            "sw-matrix",
            "--proteins",
            proteins.to_str().unwrap(),
        ]),
        "sw-matrix",
    );
    assert!(out.join("sw_matrix.tsv").exists());

    // corpus file for vocabulary/embedding training
    let corpus = dir.path().join("corpus.txt");
    let lines: Vec<String> = synth
        .dataset
        .ligands()
        .iter()
        .map(|l| l.smiles.as_str().to_string())
        .collect();
    fs::write(&corpus, lines.join("\n")).unwrap();

    assert_ok(
        &chemlang(&[
            "--out",
            out.to_str().unwrap(),
            "bpe-train",
            "--corpus",
            corpus.to_str().unwrap(),
            "--target-size",
            "60",
            "--coverage",
            "1.0",
        ]),
        "bpe-train",
    );
    assert!(out.join("vocab.txt").exists());

    assert_ok(
        &chemlang(&[
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
            "embed-train",
            "--corpus",
            corpus.to_str().unwrap(),
            "--kmer",
            "1",
            "--dim",
            "8",
            "--epochs",
            "2",
            "--min-count",
            "1",
        ]),
        "embed-train",
    );
    assert!(out.join("embedding.txt").exists());

    // featurize
    let feat = chemlang(&["--config", cfg, "featurize", "--split", "train", "--tsv"]);
    assert_ok(&feat, "featurize");
    assert!(out.join("features_train.bin").exists());
    assert!(out.join("features_train.json").exists());
    assert!(out.join("features_train.tsv").exists());
    assert!(out.join("protein_vectors.tsv").exists());

    // tune -> train -> evaluate -> analyze-mss
    assert_ok(&chemlang(&["--config", cfg, "tune"]), "tune");
    assert!(out.join("best_params.json").exists());
    assert!(out.join("cv_table.tsv").exists());

    assert_ok(&chemlang(&["--config", cfg, "train"]), "train");
    for k in 1..=5 {
        assert!(out.join(format!("models/model_{k}.json")).exists());
    }

    let eval = chemlang(&["--config", cfg, "evaluate"]);
    assert_ok(&eval, "evaluate");
    assert!(out.join("report.json").exists());
    assert!(out.join("report.tsv").exists());
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("test CI"), "{stdout}");

    assert_ok(&chemlang(&["--config", cfg, "analyze-mss"]), "analyze-mss");
    assert!(out.join("mss_bins.csv").exists());

    // cluster the trained protein vectors? cluster works on embedding files
    assert_ok(
        &chemlang(&[
            "--out",
            out.to_str().unwrap(),
            "cluster",
            "--vectors",
            out.join("embedding.txt").to_str().unwrap(),
            "--clusters",
            "3",
        ]),
        "cluster",
    );
    let clusters = fs::read_to_string(out.join("clusters.tsv")).unwrap();
    assert!(clusters.lines().count() > 3);

    // report merges
    assert_ok(
        &chemlang(&[
            "--out",
            out.to_str().unwrap(),
            "report",
            "--inputs",
            out.join("report.json").to_str().unwrap(),
        ]),
        "report",
    );
    let summary = fs::read_to_string(out.join("summary.tsv")).unwrap();
    assert!(summary.contains("mini"), "{summary}");
}

#[test]
fn exit_codes_match_error_classes() {
    let dir = tempfile::tempdir().unwrap();

    // configuration error: unknown config key -> 2
    let bad_config = dir.path().join("bad.json");
    fs::write(&bad_config, r#"{"bogus_key": 1}"#).unwrap();
    let out = chemlang(&["--config", bad_config.to_str().unwrap(), "tune"]);
    assert_eq!(out.status.code(), Some(2), "unknown key should exit 2");

    // configuration error: missing --config -> 2
    let out = chemlang(&["tune"]);
    assert_eq!(out.status.code(), Some(2));

    // data error: malformed corpus -> 3
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "CC O\n").unwrap();
    let out = chemlang(&[
        "--out",
        dir.path().to_str().unwrap(),
        "bpe-train",
        "--corpus",
        corpus.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "bad corpus should exit 3");

    // data error: nonexistent input file -> 3
    let out = chemlang(&[
        "--out",
        dir.path().to_str().unwrap(),
        "sw-matrix",
        "--proteins",
        dir.path().join("nope.tsv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn deterministic_flag_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "ab\nabab\nba\nabba\naabb\nbaba\n").unwrap();
    let run = |out: &Path| {
        let r = chemlang(&[
            "--seed",
            "5",
            "--deterministic",
            "--out",
            out.to_str().unwrap(),
            "embed-train",
            "--corpus",
            corpus.to_str().unwrap(),
            "--kmer",
            "1",
            "--dim",
            "4",
            "--epochs",
            "2",
            "--min-count",
            "1",
        ]);
        assert_ok(&r, "embed-train");
        fs::read(out.join("embedding.txt")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a, b);
}
