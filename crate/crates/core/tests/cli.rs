mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn distne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distne"))
        .args(args)
        .env_remove("DISTNE_WORK_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Value of `key=` in key=value output.
fn field(text: &str, key: &str) -> String {
    text.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: [&str; 6] = ["--walks", "2", "--walk-len", "10", "--epochs", "1"];

fn example_pipeline(out_dir: &Path, threads: &str, extra: &[&str]) -> Output {
    let edges = common::data_path("example.edges");
    let partition = common::data_path("example.partition");
    let mut args = vec![
        "pipeline",
        "--input",
        path_str(&edges),
        "--assignment",
        path_str(&partition),
        "--k",
        "3",
        "--seed",
        "7",
        "--out-dir",
        path_str(out_dir),
        "--threads",
        threads,
    ];
    args.extend(FAST);
    args.extend(extra);
    distne(&args)
}

#[test]
fn pipeline_writes_a_final_embedding_of_the_right_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = example_pipeline(dir.path(), "2", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(field(&text, "nodes"), "10");
    assert_eq!(field(&text, "edges"), "12");
    assert_eq!(field(&text, "k"), "3");
    assert_eq!(field(&text, "gamma"), "1");
    assert_eq!(field(&text, "leaves_embedded"), "4");
    assert_eq!(field(&text, "delta"), "0.285714");

    let emb = fs::read_to_string(dir.path().join("final.emb")).unwrap();
    let mut lines = emb.lines();
    assert_eq!(lines.next(), Some("10 128"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        assert_eq!(row.split_whitespace().count(), 129, "{row}");
    }
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("stats.json").exists());
    assert!(!dir.path().join("sub_1_0_0.emb").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(example_pipeline(a.path(), "1", &[]).status.success());
    assert!(example_pipeline(b.path(), "5", &[]).status.success());
    assert_eq!(
        fs::read(a.path().join("final.emb")).unwrap(),
        fs::read(b.path().join("final.emb")).unwrap()
    );
}

#[test]
fn automatic_k_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let edges = common::data_path("example.edges");
    let o = distne(&[
        "partition",
        "--input",
        path_str(&edges),
        "--k",
        "auto",
        "--mem-budget",
        "1",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let k = manifest["k_initial"].as_u64().unwrap();
    assert_eq!(field(&stdout(&o), "k"), k.to_string());
    assert!(manifest["config"]["recursion"]["k_initial"].is_null());
    assert!(k >= 2);
}

#[test]
fn stepwise_commands_match_the_pipeline() {
    let whole = tempfile::tempdir().unwrap();
    assert!(example_pipeline(whole.path(), "2", &[]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let edges = common::data_path("example.edges");
    let partition = common::data_path("example.partition");
    let mut args = vec![
        "partition",
        "--input",
        path_str(&edges),
        "--assignment",
        path_str(&partition),
        "--k",
        "3",
        "--seed",
        "7",
        "--out-dir",
        path_str(dir.path()),
    ];
    args.extend(FAST);
    let o = distne(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "leaves"), "4");

    let manifest = dir.path().join("manifest.json");
    let o = distne(&["embed", "--manifest", path_str(&manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "leaves_embedded"), "4");

    let o = distne(&["fuse", "--manifest", path_str(&manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "nodes"), "10");
    assert_eq!(field(&stdout(&o), "empty_nodes"), "0");
    assert_eq!(
        fs::read(dir.path().join("final.emb")).unwrap(),
        fs::read(whole.path().join("final.emb")).unwrap()
    );

    let o = distne(&["stats", "--manifest", path_str(&manifest)]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().count() >= 2);
    let o = distne(&["stats", "--manifest", path_str(&manifest), "--json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["gamma"], 1);
    assert_eq!(report["levels"][0]["edge_cut"], 3);
}

#[test]
fn fusing_with_a_missing_segment_fails_naming_the_leaf() {
    let dir = tempfile::tempdir().unwrap();
    assert!(example_pipeline(dir.path(), "2", &["--keep-intermediates"]).status.success());
    fs::remove_file(dir.path().join("sub_1_0_2.emb")).unwrap();
    let o = distne(&["fuse", "--manifest", path_str(&dir.path().join("manifest.json"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("1_0_2"), "{}", stderr(&o));
}

#[test]
fn pipeline_help_matches_the_golden_file() {
    let o = distne(&["pipeline", "--help"]);
    assert!(o.status.success());
    let golden = fs::read_to_string(common::data_path("help_pipeline.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let o = distne(&["pipeline", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let o = distne(&[
        "pipeline",
        "--input",
        path_str(&dir.path().join("absent.edges")),
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: "));

    let edges = common::data_path("example.edges");
    let o = distne(&[
        "pipeline",
        "--input",
        path_str(&edges),
        "--k",
        "11",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));

    let bad = dir.path().join("bad.edges");
    fs::write(&bad, "a b\nc\n").unwrap();
    let o = distne(&["pipeline", "--input", path_str(&bad), "--out-dir", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn work_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let edges = common::data_path("example.edges");
    let mut args = vec!["pipeline", "--input", path_str(&edges), "--k", "2", "--dim", "16"];
    args.extend(FAST);
    let o = Command::new(env!("CARGO_BIN_EXE_distne"))
        .args(&args)
        .env("DISTNE_WORK_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("final.emb").exists());
}

#[test]
fn evaluation_commands_report_scores() {
    let dir = tempfile::tempdir().unwrap();
    let g = distne::synth::sbm(4, 40, 0.3, 0.01, 5).unwrap();
    let edges = dir.path().join("g.edges");
    let mut w = fs::File::create(&edges).unwrap();
    g.graph.write_edge_list(&mut w).unwrap();
    drop(w);

    let mut args = vec![
        "eval-lp",
        "--graph",
        path_str(&edges),
        "--dim",
        "32",
        "--k",
        "2",
        "--seed",
        "3",
    ];
    args.extend(FAST);
    let o = distne(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let p: f64 = field(&stdout(&o), "precision").parse().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let out = dir.path().join("run");
    let mut args = vec![
        "pipeline",
        "--input",
        path_str(&edges),
        "--dim",
        "32",
        "--k",
        "2",
        "--out-dir",
        path_str(&out),
    ];
    args.extend(FAST);
    assert!(distne(&args).status.success());
    let emb = out.join("final.emb");

    let o = distne(&["eval-lp", "--graph", path_str(&edges), "--emb", path_str(&emb), "--similarity", "euclidean"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let labels = dir.path().join("labels.txt");
    let text: String = g
        .graph
        .nodes()
        .map(|u| format!("{} c{}\n", g.graph.label(u), g.community[u as usize]))
        .collect();
    fs::write(&labels, text).unwrap();
    let o = distne(&["eval-nc", "--emb", path_str(&emb), "--labels", path_str(&labels)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let micro: f64 = field(&stdout(&o), "micro_f1").parse().unwrap();
    let macro_: f64 = field(&stdout(&o), "macro_f1").parse().unwrap();
    assert!((0.0..=1.0).contains(&micro) && (0.0..=1.0).contains(&macro_));

    let o = distne(&["eval-lp", "--graph", path_str(&edges), "--emb", path_str(&emb), "--similarity", "manhattan"]);
    assert_eq!(o.status.code(), Some(1));
}
