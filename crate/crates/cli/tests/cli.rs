use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn adaptir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptir"))
        .args(args)
        .output()
        .expect("spawn adaptir")
}

fn ok(args: &[&str]) -> String {
    let out = adaptir(args);
    assert!(
        out.status.success(),
        "adaptir {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic benchmark: 12 queries, 12 training queries, 600 distractors.
fn bench() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("bench");
    ok(&[
        "synth",
        "--queries",
        "12",
        "--train-queries",
        "12",
        "--distractors",
        "600",
        "--seed",
        "7",
        "--out",
        s(&root),
    ]);
    (dir, root)
}

#[test]
fn missing_corpus_exits_2_and_names_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("no_such_corpus.jsonl");
    let out = adaptir(&[
        "index",
        "--corpus",
        s(&missing),
        "--out",
        s(&dir.path().join("i.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_such_corpus.jsonl"), "{stderr}");
    assert!(!dir.path().join("i.json").exists());
}

#[test]
fn paragraph_mode_counts_paragraphs() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(
        &corpus,
        r#"{"id": "a", "title": "t", "text": "first paragraph\n\nsecond one\n\nthird and last"}"#,
    )
    .unwrap();
    let index = dir.path().join("i.json");
    let stdout = ok(&[
        "index",
        "--corpus",
        s(&corpus),
        "--mode",
        "paragraph",
        "--out",
        s(&index),
    ]);
    assert!(stdout.contains("indexed 3 units"), "{stdout}");
    assert!(index.exists());

    let stdout = ok(&["index", "--corpus", s(&corpus), "--out", s(&index)]);
    assert!(stdout.contains("indexed 1 units"), "{stdout}");
}

#[test]
fn bad_flags_exit_2() {
    let (_dir, root) = bench();
    let corpus = root.join("corpus.jsonl");
    let out = adaptir(&[
        "index",
        "--corpus",
        s(&corpus),
        "--bits",
        "40",
        "--out",
        "x.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = adaptir(&[
        "index",
        "--corpus",
        s(&corpus),
        "--mode",
        "sentence",
        "--out",
        "x.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let queries = root.join("queries.jsonl");
    let out = adaptir(&[
        "eval",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&queries),
        "--cutoff",
        "top:3",
        "--out",
        "x.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_reports_counts_and_is_deterministic() {
    let (dir, root) = bench();
    let corpus = root.join("corpus.jsonl");
    let queries = root.join("train_queries.jsonl");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let stdout = ok(&[
        "train",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&queries),
        "--out",
        s(&a),
    ]);
    assert!(stdout.contains("N_used=12 N_excluded=0"), "{stdout}");
    assert!(stdout.contains("surrogate_loss=") && stdout.contains("true_loss="));
    ok(&[
        "train",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&queries),
        "--out",
        s(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let text = fs::read_to_string(&a).unwrap();
    assert!(
        text.contains("\"seed\": 42") && text.contains("\"lambda\": 0.01"),
        "{text}"
    );

    // A prebuilt index gives the same model.
    let index = dir.path().join("i.json");
    let c = dir.path().join("c.json");
    ok(&["index", "--corpus", s(&corpus), "--out", s(&index)]);
    ok(&[
        "train",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&queries),
        "--index",
        s(&index),
        "--out",
        s(&c),
    ]);
    let model = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("config");
        v
    };
    assert_eq!(model(&a), model(&c));
}

#[test]
fn train_without_usable_queries_fails() {
    let (dir, root) = bench();
    let queries = dir.path().join("q.jsonl");
    fs::write(
        &queries,
        "{\"id\": \"x\", \"question\": \"what is the t00001w0\", \"answers\": [\"nowhere to be found\"]}\n",
    )
    .unwrap();
    let model = dir.path().join("m.json");
    let out = adaptir(&[
        "train",
        "--corpus",
        s(&root.join("corpus.jsonl")),
        "--queries",
        s(&queries),
        "--out",
        s(&model),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no usable training query"));
    assert!(!model.exists());
}

#[test]
fn sweep_csv_shape() {
    let (dir, root) = bench();
    let corpus = root.join("corpus.jsonl");
    let model = dir.path().join("m.json");
    ok(&[
        "train",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&root.join("train_queries.jsonl")),
        "--grid",
        "36,144,576",
        "--out",
        s(&model),
    ]);
    let csv = dir.path().join("sweep.csv");
    let ordinal = format!("ordinal:{}", s(&model));
    let stdout = ok(&[
        "sweep",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&root.join("queries.jsonl")),
        "--grid",
        "36,144,576",
        "--cutoff",
        "fixed:1",
        "--cutoff",
        "fixed:5",
        "--cutoff",
        &ordinal,
        "--out",
        s(&csv),
    ]);
    assert!(stdout.contains("ordinal-b1: total_regret="), "{stdout}");
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(
        header.starts_with("# adaptir ") && header.contains("\"seed\":42"),
        "{header}"
    );
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    for metric in ["exact_match", "mean_cutoff", "coverage"] {
        let n = rows.iter().filter(|r| r[2] == metric).count();
        assert_eq!(n, 3 * 3, "{metric}");
    }
    let systems: std::collections::BTreeSet<&str> = rows
        .iter()
        .filter(|r| r[2] == "exact_match")
        .map(|r| r[0])
        .collect();
    assert_eq!(
        systems.into_iter().collect::<Vec<_>>(),
        ["ordinal-b1", "top-1", "top-5"]
    );
    assert_eq!(rows.iter().filter(|r| r[2] == "recall@20").count(), 3);

    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("sweep.summary.json")).unwrap()).unwrap();
    assert!(summary["total_regret"]["top-1"].is_number());
    assert_eq!(summary["grid"], serde_json::json!([36, 144, 576]));
}

#[test]
fn eval_is_byte_identical_across_runs() {
    let (dir, root) = bench();
    let corpus = root.join("corpus.jsonl");
    let queries = root.join("queries.jsonl");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        ok(&[
            "eval",
            "--corpus",
            s(&corpus),
            "--queries",
            s(&queries),
            "--out",
            s(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.summary.json")).unwrap(),
        fs::read(dir.path().join("b.summary.json")).unwrap()
    );
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.contains("threshold-0.75,624,exact_match,"), "{text}");

    let c = dir.path().join("c.csv");
    ok(&[
        "eval",
        "--corpus",
        s(&corpus),
        "--queries",
        s(&queries),
        "--seed",
        "43",
        "--out",
        s(&c),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn oversized_grid_fails_before_work() {
    let (dir, root) = bench();
    let csv = dir.path().join("sweep.csv");
    let out = adaptir(&[
        "sweep",
        "--corpus",
        s(&root.join("corpus.jsonl")),
        "--queries",
        s(&root.join("queries.jsonl")),
        "--grid",
        "36,100000",
        "--out",
        s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pool"));
    assert!(!csv.exists());
}

#[test]
fn retrieve_writes_ranked_jsonl() {
    let (dir, root) = bench();
    let corpus = root.join("corpus.jsonl");
    let index = dir.path().join("i.json");
    ok(&["index", "--corpus", s(&corpus), "--out", s(&index)]);
    let out = dir.path().join("r.jsonl");
    ok(&[
        "retrieve",
        "--index",
        s(&index),
        "--queries",
        s(&root.join("queries.jsonl")),
        "--tau",
        "5",
        "--cutoff",
        "fixed:2",
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 13);
    assert_eq!(lines[0]["config"]["command"], "retrieve");
    for rec in &lines[1..] {
        assert_eq!(rec["cutoff"], 2);
        let scores: Vec<f64> = rec["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["raw_score"].as_f64().unwrap())
            .collect();
        assert_eq!(scores.len(), 5);
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    let stdout = ok(&[
        "retrieve",
        "--corpus",
        s(&corpus),
        "--question",
        "what is the answer",
        "--tau",
        "3",
    ]);
    assert_eq!(stdout.lines().count(), 2);
}
