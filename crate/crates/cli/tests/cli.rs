use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 4
[model]
layers = 1
heads = 2
d_model = 16
[train]
num_trajectories = 4
steps = 5
batch_size = 2
log_every = 2
formulation = "direction1d"
[eval]
trials = 2
max_steps = 10
[gradcheck]
seq_len = 6
samples_per_tensor = 4
"#;

fn inspire(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inspire"))
        .args(args)
        .current_dir(dir)
        .env_remove("INSPIRE_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    (dir, cfg)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn gen_data_is_byte_deterministic_and_summarized() {
    let (dir, _) = setup();
    let d = dir.path();
    let a = inspire(d, &["gen-data", "-c", "tiny.toml", "--out", "a.jsonl", "-n", "6"]);
    inspire(d, &["gen-data", "-c", "tiny.toml", "--out", "b.jsonl", "-n", "6"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("b.jsonl")).unwrap());
    let summary: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(summary["count"], 6);
    assert_eq!(summary["beacon_adjacency_rate"], 1.0);
    let text = std::fs::read_to_string(d.join("a.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["seed"], 4);
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn seed_is_required_and_env_overrides() {
    let (dir, _) = setup();
    let d = dir.path();
    assert_eq!(code(&inspire(d, &["gen-data", "--out", "x.jsonl", "-n", "1"])), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_inspire"))
        .args(["gen-data", "-c", "tiny.toml", "--out", "x.jsonl", "-n", "1"])
        .current_dir(d)
        .env("INSPIRE_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(d.join("x.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["seed"], 77);
}

#[test]
fn bad_config_and_arguments_exit_2() {
    let (dir, _) = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "seed = 1\nbogus = 3\n").unwrap();
    assert_eq!(code(&inspire(d, &["gen-data", "-c", "bad.toml", "--out", "x", "-n", "1"])), 2);
    inspire(d, &["gen-data", "-c", "tiny.toml", "--out", "a.jsonl", "-n", "2"]);
    let o = inspire(d, &["annotate", "-c", "tiny.toml", "--in", "a.jsonl", "--out", "b", "--formulation", "sideways"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&inspire(d, &["train"])), 2);
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let (dir, _) = setup();
    let o = inspire(dir.path(), &["annotate", "-c", "tiny.toml", "--in", "nope.jsonl", "--out", "b", "--formulation", "distance"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn annotate_lists_extraction_failures_by_line() {
    let (dir, _) = setup();
    let d = dir.path();
    inspire(d, &["gen-data", "-c", "tiny.toml", "--out", "a.jsonl", "-n", "3"]);
    let text = std::fs::read_to_string(d.join("a.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    rec["task"]["instruction"] = serde_json::json!(["do", "something"]);
    lines[2] = rec.to_string();
    std::fs::write(d.join("broken.jsonl"), lines.join("\n") + "\n").unwrap();
    let o = inspire(d, &["annotate", "-c", "tiny.toml", "--in", "broken.jsonl", "--out", "b.jsonl", "--formulation", "direction1d"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!d.join("b.jsonl").exists());

    let o = inspire(d, &["annotate", "-c", "tiny.toml", "--in", "a.jsonl", "--out", "b.jsonl", "--formulation", "direction1d"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(d.join("b.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["formulation"], "direction1d");
    assert_eq!(header["config"]["run"]["seed"], 4);
}

#[test]
fn train_eval_artifacts_and_threshold_exit() {
    let (dir, _) = setup();
    let d = dir.path();
    let o = inspire(d, &["train", "-c", "tiny.toml", "--out", "m.ckpt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = std::fs::read(d.join("m.ckpt")).unwrap();
    assert_eq!(&ckpt[..8], b"INSPCKPT");
    let sidecar: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("m.ckpt.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["train"]["steps"], 5);
    let csv = std::fs::read_to_string(d.join("m.ckpt.loss.csv")).unwrap();
    assert!(csv.starts_with("# config={"));
    assert_eq!(csv.lines().nth(1), Some("step,loss,accuracy"));

    // retraining reproduces the checkpoint byte for byte
    inspire(d, &["train", "-c", "tiny.toml", "--out", "m2.ckpt"]);
    assert_eq!(ckpt, std::fs::read(d.join("m2.ckpt")).unwrap());

    let o = inspire(d, &["eval", "-c", "tiny.toml", "--checkpoint", "m.ckpt", "--out", "r.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["splits"].as_array().unwrap().len(), 4);
    assert_eq!(report["report"]["config"]["run"]["seed"], 4);
    assert!(d.join("r.csv").exists());
    assert!(d.join("r.json.timing.json").exists());

    let o = inspire(d, &["eval", "-c", "tiny.toml", "--checkpoint", "m.ckpt", "--out", "r.json", "--min-success", "1.01"]);
    assert_eq!(code(&o), 3);
    let o = inspire(d, &["eval", "-c", "tiny.toml", "--checkpoint", "m.ckpt", "--out", "r.json", "--min-success", "0.0"]);
    assert_eq!(code(&o), 0);
    let o = inspire(d, &["eval", "-c", "tiny.toml", "--checkpoint", "m.ckpt", "--out", "r.json", "--min-success", "0.5", "--split", "nope"]);
    assert_eq!(code(&o), 2);

    std::fs::write(d.join("junk.ckpt"), b"not a checkpoint").unwrap();
    let o = inspire(d, &["eval", "-c", "tiny.toml", "--checkpoint", "junk.ckpt", "--out", "r.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn gradcheck_reports_tolerance() {
    let (dir, _) = setup();
    let o = inspire(dir.path(), &["gradcheck", "-c", "tiny.toml"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().last().unwrap().starts_with("max rel err"), "{out}");
    assert!(out.contains("< 1e-4"));
}

#[test]
fn ablation_writes_json_csv_and_table() {
    let (dir, _) = setup();
    let d = dir.path();
    let cfg = format!(
        "{TINY}[ablation]\nformulations = [\"none\", \"distance\"]\nlayouts = [\"vqa_first\"]\nseeds = [0]\n"
    );
    std::fs::write(d.join("abl.toml"), cfg.replace("[eval]\ntrials = 2", "[eval]\ntrials = 1")).unwrap();
    let o = inspire(d, &["ablate", "-c", "abl.toml", "--out-dir", "out", "--seeds", "2", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("out/ablation.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["cells"].as_array().unwrap().len(), 4);
    assert_eq!(json["grid"]["seeds"], serde_json::json!([4, 5]));
    let table = std::fs::read_to_string(d.join("out/table.md")).unwrap();
    assert!(table.contains('|'));
    assert!(std::fs::read_to_string(d.join("out/ablation.csv")).unwrap().starts_with("# config="));
}
