//! End-to-end runs of the `cellgraph` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellgraph::cli::{EXIT_CONFIG, EXIT_IO, EXIT_SCHEMA, EXIT_USAGE};

fn cellgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellgraph")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_with_prefix(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    v.sort();
    v
}

fn assert_error_line(out: &Output, code: i32, category: &str) {
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(
        stderr.starts_with(&format!("error: category={category} code={code} message=\"")),
        "{stderr}"
    );
}

const SMALL_GEN: &str = r#"{"num_ues": 40}"#;

fn small_dataset(dir: &Path) -> PathBuf {
    let cfg = dir.join("gen.json");
    std::fs::write(&cfg, SMALL_GEN).unwrap();
    let out = cellgraph(&["gen", "--config", s(&cfg), "--seed", "3", "--out", s(&dir.join("g"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("g_dataset.jsonl")
}

#[test]
fn gen_writes_scenario_dataset_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let names: Vec<String> = files_with_prefix(dir.path(), "g_")
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["g_config.json", "g_dataset.jsonl", "g_scenario.json"]);

    let text = std::fs::read_to_string(&data).unwrap();
    let first = text.lines().next().unwrap();
    let inst = cellgraph::cellfree::InstanceGraph::from_json_line(first).unwrap();
    assert_eq!(inst.num_aps(), 25);
    assert_eq!(inst.ue_node_id, 25);
    assert_eq!(inst.serving().len(), 4);

    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["scenario"]["seed"], 3);
    assert_eq!(cfg["instances"].as_u64().unwrap() as usize, text.lines().count());
}

#[test]
fn features_and_embed_on_a_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("tri.json");
    std::fs::write(
        &graph,
        r#"{"num_nodes": 4,
            "edges": [{"src": 0, "dst": 1, "directed": false},
                      {"src": 1, "dst": 2, "directed": false},
                      {"src": 0, "dst": 2, "directed": false},
                      {"src": 2, "dst": 3, "directed": false}],
            "node_features": [[1.0], [0.0], [0.5], [2.0]]}"#,
    )
    .unwrap();

    let out = cellgraph(&["features", "--graph", s(&graph), "--level", "node", "--out", s(&dir.path().join("n"))]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("n_features.csv")).unwrap();
    assert_eq!(csv.lines().nth(3).unwrap(), "2,3,1,0.3333333333333333");

    let pairs = dir.path().join("pairs.json");
    std::fs::write(&pairs, r#"{"pairs": [[0, 3]], "katz": {"beta": 0.5, "max_length": 2}}"#).unwrap();
    let out = cellgraph(&[
        "features", "--graph", s(&graph), "--level", "edge", "--config", s(&pairs), "--out", s(&dir.path().join("e")),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("e_features.csv")).unwrap();
    // 0-2-3 is the only 2-walk from 0 to 3: katz = 0.25
    assert_eq!(csv, "id,shortest_path,common_neighbors,jaccard,katz\n0-3,2,1,0.5,0.25\n");

    let out = cellgraph(&["features", "--graph", s(&graph), "--level", "graph", "--out", s(&dir.path().join("gr"))]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("gr_features.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "graph,4,4,1,5");

    let prefix = dir.path().join("emb");
    let out = cellgraph(&["embed", "--graph", s(&graph), "--seed", "2", "--out", s(&prefix)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let emb = std::fs::read_to_string(dir.path().join("emb_embeddings.csv")).unwrap();
    assert_eq!(emb.lines().count(), 5);
    let again = dir.path().join("emb2");
    cellgraph(&["embed", "--graph", s(&graph), "--seed", "2", "--out", s(&again)]);
    assert_eq!(emb, std::fs::read_to_string(dir.path().join("emb2_embeddings.csv")).unwrap());
}

#[test]
fn untrained_model_scores_at_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let cfg = dir.path().join("train.json");
    std::fs::write(&cfg, r#"{"train": {"epochs": 0}}"#).unwrap();
    let model_prefix = dir.path().join("m");
    let out = cellgraph(&[
        "train", "--dataset", s(&data), "--level", "edge", "--config", s(&cfg), "--out", s(&model_prefix),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let eval_prefix = dir.path().join("ev");
    let out = cellgraph(&[
        "eval",
        "--model",
        s(&dir.path().join("m_model.json")),
        "--dataset",
        s(&data),
        "--out",
        s(&eval_prefix),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("ev_metrics.csv")).unwrap();
    let auc: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("eval,roc_auc,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((auc - 0.5).abs() <= 0.1, "{auc}");
    let svg = std::fs::read_to_string(dir.path().join("ev_pr.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("Recall") && svg.contains("Precision"));
}

#[test]
fn training_improves_on_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let cfg = dir.path().join("train.json");
    std::fs::write(&cfg, r#"{"train": {"epochs": 60, "patience": 0}, "val_fraction": 0.2}"#).unwrap();
    let out = cellgraph(&[
        "train", "--dataset", s(&data), "--level", "node", "--config", s(&cfg), "--seed", "5", "--out",
        s(&dir.path().join("m")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let history = std::fs::read_to_string(dir.path().join("m_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 61);
    let out = cellgraph(&[
        "eval",
        "--model",
        s(&dir.path().join("m_model.json")),
        "--dataset",
        s(&data),
        "--out",
        s(&dir.path().join("ev")),
    ]);
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("ev_metrics.csv")).unwrap();
    let auc: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("eval,roc_auc,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(auc > 0.7, "{auc}");
}

#[test]
fn small_apselect_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ap.json");
    std::fs::write(
        &cfg,
        r#"{"num_train": 30, "num_val": 10, "num_test": 20, "train": {"epochs": 5}}"#,
    )
    .unwrap();
    let out = cellgraph(&["apselect", "--config", s(&cfg), "--seed", "4", "--out", s(&dir.path().join("ap"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = files_with_prefix(dir.path(), "ap_")
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    assert_eq!(
        names,
        [
            "ap_config.json",
            "ap_metrics.csv",
            "ap_pr.csv",
            "ap_pr.svg",
            "ap_pr_nearest.csv",
            "ap_pr_shallow.csv",
            "ap_stage1_history.csv",
            "ap_stage1_model.json",
            "ap_stage2_history.csv",
            "ap_stage2_model.json",
        ]
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), names.len());
}

#[test]
fn malformed_input_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.json");
    std::fs::write(&graph, "{\"num_nodes\": 2, \"edges\": [").unwrap();
    let out = cellgraph(&["features", "--graph", s(&graph), "--level", "node", "--out", s(&dir.path().join("x"))]);
    assert_error_line(&out, EXIT_SCHEMA, "schema");
    assert!(files_with_prefix(dir.path(), "x").is_empty());

    // valid JSON that breaks the schema reports the offending path
    std::fs::write(&graph, r#"{"num_nodes": 2, "edges": [{"src": 0, "dst": "one", "directed": true}], "node_features": [[0], [1]]}"#)
        .unwrap();
    let out = cellgraph(&["features", "--graph", s(&graph), "--level", "node", "--out", s(&dir.path().join("x"))]);
    assert_error_line(&out, EXIT_SCHEMA, "schema");
    assert!(String::from_utf8_lossy(&out.stderr).contains("edges[0].dst"));

    // a self-loop is rejected by graph validation
    std::fs::write(&graph, r#"{"num_nodes": 2, "edges": [{"src": 1, "dst": 1, "directed": true}], "node_features": [[0], [1]]}"#)
        .unwrap();
    let out = cellgraph(&["features", "--graph", s(&graph), "--level", "node", "--out", s(&dir.path().join("x"))]);
    assert_error_line(&out, EXIT_SCHEMA, "schema");
    assert!(files_with_prefix(dir.path(), "x").is_empty());
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = cellgraph(&["features", "--level", "node"]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let out = cellgraph(&["bogus"]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));

    let missing = dir.path().join("nope.json");
    let out = cellgraph(&["features", "--graph", s(&missing), "--level", "node", "--out", s(&dir.path().join("x"))]);
    assert_error_line(&out, EXIT_IO, "io");

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"num_ues": 10, "unknown_knob": 1}"#).unwrap();
    let out = cellgraph(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("g"))]);
    assert_error_line(&out, EXIT_CONFIG, "config");
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_knob"));

    std::fs::write(&cfg, r#"{"num_aps": 0}"#).unwrap();
    let out = cellgraph(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("g"))]);
    assert_error_line(&out, EXIT_CONFIG, "config");
    assert!(files_with_prefix(dir.path(), "g").is_empty());

    std::fs::write(dir.path().join("data.jsonl"), "{\"num_nodes\": 1}\n").unwrap();
    let out = cellgraph(&[
        "train",
        "--dataset",
        s(&dir.path().join("data.jsonl")),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_error_line(&out, EXIT_SCHEMA, "schema");
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
