use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn graph(name: &str) -> String {
    repo_root().join("data/graphs").join(name).display().to_string()
}

fn stub_cache() -> String {
    repo_root().join("data/stub_cache").display().to_string()
}

fn llmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llmpc"))
        .args(args)
        .env_remove("LLMPC_ENDPOINT")
        .env_remove("LLMPC_MODEL")
        .env_remove("LLMPC_API_KEY")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = llmpc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_of_alzheimers_shape() {
    let out = ok(&["stats", &graph("alzheimers_shape.json")]);
    assert_eq!(out.lines().next(), Some("nodes: 11, edges: 19"));
    let j: Value = serde_json::from_str(&ok(&["stats", "--json", &graph("asia.json")])).unwrap();
    assert_eq!(j["n_nodes"], 8);
    assert_eq!(j["n_edges"], 8);
}

#[test]
fn gen_data_is_deterministic() {
    let args = ["gen-data", "--graph", "chain3", "--mech", "linear", "--n", "100", "--seed", "7"];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(Sha256::digest(&a), Sha256::digest(&b));
    assert_eq!(a.lines().count(), 101);
    assert_eq!(a.lines().next(), Some("X1,X2,X3"));
    let other = ok(&["gen-data", "--graph", "chain3", "--mech", "linear", "--n", "100", "--seed", "8"]);
    assert_ne!(a, other);
}

#[test]
fn oracle_discovery_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["asia.json", "alzheimers_shape.json"] {
        let pred = dir.path().join(format!("pred_{name}"));
        ok(&["discover", "--ci", "oracle", "--truth", &graph(name), "--out", s(&pred)]);
        let report: Value =
            serde_json::from_str(&ok(&["evaluate", "--pred", s(&pred), "--truth", &graph(name), "--mode", "cpdag_aware"]))
                .unwrap();
        assert_eq!(report["f1"], 1.0, "{name}: {report}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(llmpc(&["stats", &graph("asia.json")]).status.code(), Some(0));
    assert_eq!(llmpc(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(llmpc(&["gen-data", "--graph", "chain3", "--mech", "cubic"]).status.code(), Some(2));
    assert_eq!(llmpc(&["discover", "--ci", "oracle"]).status.code(), Some(2));
    assert_eq!(llmpc(&["gen-data", "--graph", "chain3", "--noise", "laplace:0,1"]).status.code(), Some(2));
    assert_eq!(llmpc(&["stats", "/no/such/graph.json"]).status.code(), Some(1));
    assert_eq!(llmpc(&["discover", "--ci", "oracle", "--truth", "chain3", "--alpha", "2"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cyclic = dir.path().join("cyclic.json");
    fs::write(
        &cyclic,
        r#"{"name":"c","nodes":[{"name":"A"},{"name":"B"}],"edges":[["A","B"],["B","A"]]}"#,
    )
    .unwrap();
    if llmpc(&["stats", s(&cyclic)]).status.success() {
        assert_eq!(llmpc(&["gen-data", "--graph", s(&cyclic)]).status.code(), Some(1));
    }
}

#[test]
fn manifests_record_and_reproduce_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    ok(&["--seed", "3", "gen-data", "--graph", &graph("asia.json"), "--n", "300", "--out", s(&data)]);
    let graph_out = dir.path().join("pc.json");
    ok(&["discover", "--data", s(&data), "--out", s(&graph_out)]);

    for artifact in [&data, &graph_out] {
        let manifest = json(&PathBuf::from(format!("{}.manifest.json", artifact.display())));
        assert_eq!(manifest["outputs"][0]["sha256"], digest(artifact));
        assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
        assert!(manifest["started_at"].is_string());
        let argv: Vec<String> = manifest["command_line"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        let before = digest(artifact);
        fs::remove_file(artifact).unwrap();
        let args: Vec<&str> = argv[1..].iter().map(String::as_str).collect();
        ok(&args);
        assert_eq!(digest(artifact), before, "rerun of {argv:?}");
    }
    let m = json(&dir.path().join("pc.json.manifest.json"));
    assert_eq!(m["inputs"][0]["sha256"], digest(&data));
    assert_eq!(m["seeds"]["seed"], 0);
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    ok(&["--jobs", "1", "gen-data", "--graph", &graph("asia.json"), "--n", "400", "--out", s(&data)]);
    let other = ok(&["--jobs", "4", "gen-data", "--graph", &graph("asia.json"), "--n", "400"]);
    assert_eq!(fs::read_to_string(&data).unwrap(), other);
    let runs: Vec<String> = ["1", "3"]
        .iter()
        .map(|j| ok(&["--jobs", j, "discover", "--ci", "kci", "--data", s(&data), "--kci-max-rows", "200"]))
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn prior_replays_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("prior.json");
    ok(&[
        "prior", "--vars", &graph("asia.json"), "--strategy", "bfs", "--model", "stub", "--cache-dir", &stub_cache(),
        "--out", s(&out),
    ]);
    let report: Value = serde_json::from_str(&ok(&[
        "evaluate", "--pred", s(&out), "--truth", &graph("asia.json"),
    ]))
    .unwrap();
    assert_eq!(report["f1"], 1.0);
    let m = json(&dir.path().join("prior.json.manifest.json"));
    assert_eq!(m["extra"]["network_calls"], 0);
    assert_eq!(m["extra"]["offline"], true);

    let empty = tempfile::tempdir().unwrap();
    let miss = llmpc(&["prior", "--vars", &graph("asia.json"), "--model", "stub", "--cache-dir", s(empty.path())]);
    assert_eq!(miss.status.code(), Some(1));
}

#[test]
fn memtest_replays_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mem.json");
    ok(&[
        "memtest", "--graph", &graph("asia.json"), "--dataset-name", "asia", "--fraction", "0.5", "--seed", "0",
        "--model", "stub", "--cache-dir", &stub_cache(), "--out", s(&out),
    ]);
    let report = json(&out);
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    for r in results {
        for part in ["nodes", "edges"] {
            if !r["score"][part].is_null() {
                assert_eq!(r["score"][part]["f1"], 1.0, "{}", r["task"]["kind"]);
            }
        }
    }
    let m = json(&dir.path().join("mem.json.manifest.json"));
    assert_eq!(m["extra"]["network_calls"], 0);
}

#[test]
fn refine_writes_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("refined.json");
    let scores = dir.path().join("scores.csv");
    ok(&[
        "refine", "--graph", &graph("asia.json"), "--ci", "oracle", "--truth", &graph("asia.json"), "--prune-frac",
        "0.25", "--expand", "0.05", "--out", s(&out), "--scores", s(&scores),
    ]);
    let text = fs::read_to_string(&scores).unwrap();
    assert_eq!(text.lines().next(), Some("stage,x,y,witness,p_value"));
    assert_eq!(text.lines().filter(|l| l.starts_with("prune,")).count(), 8);
    let refined = json(&out);
    assert_eq!(refined["edges"].as_array().map(Vec::len), Some(6));
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    fs::write(
        &config,
        format!(
            r#"
seeds = [0]
alphas = [0.05]
n_samples = 300
mode = "cpdag_aware"

[[datasets]]
name = "chain"
graph = "{}"
mechanism = "linear"

[[methods]]
name = "oracle"
ci = "oracle"
"#,
            graph("chain3.json")
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let table = ok(&["bench", "--config", s(&config), "--out-dir", s(&out_dir)]);
    assert!(table.contains("oracle"));
    for f in ["runs.csv", "summary.csv", "table.md", "errors.json", "bench.manifest.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
}
