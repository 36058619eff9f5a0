//! End-to-end behaviour of the `slotie` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use slotie::checkpoint::Checkpoint;
use slotie::io::read_grids_jsonl;
use slotie_core::nn::train::evaluate;
use slotie_core::nn::TrainExample;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn slotie(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slotie")).args(args).current_dir(dir).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn f(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(slotie(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(slotie(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(slotie(dir.path(), &["score", "--scheme", "carb"]).status.code(), Some(1));
    let bad = slotie(dir.path(), &["score", "--scheme", "bleu", "--gold", "a", "--pred", "b", "--out", "c"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn malformed_jsonl_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    std::fs::write(&input, "{\"sentence\": \"a b c\", \"tuples\": [[\"a\", \"b\", \"c\"]]}\n{\"sentence\": 7}\n").unwrap();
    let out = slotie(dir.path(), &["convert", "--format", "imojie", "--in", "bad.jsonl", "--out", "g.jsonl", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.jsonl:2"), "{}", stderr(&out));
}

#[test]
fn malformed_conll_tags_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conll"), "John A0-B\nate A1-I\napples A1-B\n").unwrap();
    let out = slotie(dir.path(), &["convert", "--format", "lsoie", "--in", "bad.conll", "--out", "g.jsonl", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":1:"), "{}", stderr(&out));
}

#[test]
fn lsoie_conversion_reports_filtered_layers() {
    let dir = tempfile::tempdir().unwrap();
    let conll = f("lsoie_sample.conll");
    let out = slotie(dir.path(), &["convert", "--format", "lsoie", "--in", &conll, "--out", "g.jsonl", "--report", "r.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("r.json"));
    assert_eq!(report["details"]["records_read"], 4);
    assert_eq!(report["details"]["records_converted"], 2);
    assert_eq!(report["details"]["skipped"].as_array().unwrap().len(), 3);
    assert!(report["config"]["model"].is_object());
    let grids = read_grids_jsonl(&dir.path().join("g.jsonl")).unwrap();
    assert_eq!(grids.len(), 2);
    assert!(dir.path().join("g.jsonl.meta.json").exists());
}

#[test]
fn synth_respects_pool_size() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.tsv"), "a\tb\tc\nd\te\tf\n").unwrap();
    let out = slotie(dir.path(), &["synth", "--pool", "small.tsv", "--n", "5", "--out", "s.tsv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("pool"), "{}", stderr(&out));
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[train]\nlerning_rate = 0.1\n").unwrap();
    let pool = f("pool.tsv");
    let out = slotie(dir.path(), &["synth", "--pool", &pool, "--n", "5", "--out", "s.tsv", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn score_excludes_unknown_sentences_and_tolerates_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pred.tsv"), "A sentence nobody annotated .\t0.9\tA sentence\tnobody annotated\tit\n").unwrap();
    let gold = f("carb_gold.tsv");
    let out = slotie(dir.path(), &["score", "--scheme", "carb", "--gold", &gold, "--pred", "pred.tsv", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("not in gold"));
    let report = read_json(&dir.path().join("s.json"));
    assert_eq!(report["report"]["excluded_pred_sentences"], 1);
    assert_eq!(report["report"]["f1"], 0.0);
    assert_eq!(report["config"]["scheme"], "carb");
}

#[test]
fn gold_scores_perfectly_under_every_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let gold = f("carb_gold.tsv");
    for scheme in ["carb", "carb11", "oie2016", "wire57"] {
        let out = slotie(dir.path(), &["score", "--scheme", scheme, "--gold", &gold, "--pred", &gold, "--out", "s.json"]);
        assert!(out.status.success());
        let report = read_json(&dir.path().join("s.json"));
        for key in ["precision", "recall", "f1"] {
            assert_eq!(report["report"][key], 1.0, "{scheme} {key}");
        }
    }
}

#[test]
fn exploding_learning_rate_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let pool = f("pool.tsv");
    let synth = slotie(dir.path(), &["synth", "--pool", &pool, "--n", "12", "--seed", "1", "--out", "s.tsv", "--grids", "s.jsonl"]);
    assert!(synth.status.success());
    std::fs::write(dir.path().join("c.toml"), "[model.encoder]\nhidden = 8\nblocks = 1\nff_hidden = 8\n").unwrap();
    let args = ["train", "--data", "s.jsonl", "--config", "c.toml", "--out", "m.json", "--learning-rate", "1e300", "--epochs", "3"];
    let out = slotie(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn checkpoint_reload_reproduces_selection_score() {
    let dir = tempfile::tempdir().unwrap();
    let pool = f("pool.tsv");
    let config = f("run.toml");
    let synth = slotie(dir.path(), &["synth", "--pool", &pool, "--n", "30", "--seed", "2", "--out", "s.tsv", "--grids", "s.jsonl"]);
    assert!(synth.status.success(), "{}", stderr(&synth));
    let train = slotie(dir.path(), &["train", "--data", "s.jsonl", "--config", &config, "--out", "m.json", "--epochs", "4"]);
    assert!(train.status.success(), "{}", stderr(&train));

    let ckpt = Checkpoint::load(&dir.path().join("m.json")).unwrap();
    assert_eq!(ckpt.history.len(), ckpt.best_epoch);
    let data: Vec<TrainExample> = read_grids_jsonl(&dir.path().join("s.jsonl"))
        .unwrap()
        .into_iter()
        .map(|r| TrainExample { seq: r.seq, gold: r.grid })
        .collect();
    let selection: Vec<&TrainExample> = ckpt.selection_indices.iter().map(|&i| &data[i]).collect();
    assert_eq!(selection.len(), 6);
    let f1 = evaluate(&ckpt.model, &selection, &ckpt.config.train.loss).unwrap().macro_f1();
    assert_eq!(f1, ckpt.best_macro_f1);

    let metrics = read_json(&dir.path().join("m.json.metrics.json"));
    assert_eq!(metrics["history"].as_array().unwrap().len(), 4);
}

#[test]
fn extraction_writes_metadata_without_timings() {
    let dir = tempfile::tempdir().unwrap();
    let pool = f("pool.tsv");
    let config = f("run.toml");
    assert!(slotie(dir.path(), &["synth", "--pool", &pool, "--n", "10", "--out", "s.tsv", "--grids", "s.jsonl"]).status.success());
    assert!(slotie(dir.path(), &["train", "--data", "s.jsonl", "--config", &config, "--out", "m.json", "--epochs", "1"]).status.success());
    let long = vec!["word"; 80].join(" ");
    std::fs::write(dir.path().join("in.txt"), format!("Paris is the capital of France .\n\n{long}\n")).unwrap();
    let out = slotie(dir.path(), &["extract", "--checkpoint", "m.json", "--in", "in.txt", "--out", "p.tsv", "--require-all-parts", "false"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("sentences/sec"));
    assert!(stderr(&out).contains("exceed"));
    let meta = read_json(&dir.path().join("p.tsv.meta.json"));
    assert_eq!(meta["details"]["sentences"], 2);
    assert_eq!(meta["details"]["skipped_lines"], serde_json::json!([2]));
    assert_eq!(meta["config"]["decode"]["require_all_parts"], false);
    assert!(!std::fs::read_to_string(dir.path().join("p.tsv.meta.json")).unwrap().contains("per_second"));
}
