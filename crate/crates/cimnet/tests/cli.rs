use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cimnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cimnet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const SMALL: &str = r#"{
  "family": "mbv3",
  "setting": "elastic-arch-elastic-config",
  "k": 2,
  "m": 120,
  "n": 30,
  "seeds": [5],
  "out_dir": "out"
}"#;

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.json", SMALL);
    let out = cimnet(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out");

    let mut front = csv::Reader::from_path(run.join("front.csv")).unwrap();
    assert_eq!(
        front.headers().unwrap(),
        vec!["genome_id", "accuracy", "cycles", "genome"]
    );
    assert!(front.records().count() > 0);

    let history = fs::read_to_string(run.join("history.jsonl")).unwrap();
    let lines: Vec<Value> = history
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["training_size"], 60);

    let mut eval = csv::Reader::from_path(run.join("predictor_eval.csv")).unwrap();
    assert_eq!(eval.records().count(), 2);

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["accuracy_kind"], "PROXY");
    assert_eq!(summary["budget_violations"], 0);
    assert!(summary["cycle_reduction_at_iso_accuracy"].as_f64().unwrap() > 0.0);

    let genomes = fs::read_to_string(run.join("genomes.jsonl")).unwrap();
    assert_eq!(genomes.lines().count(), 60);
    let layout: Value =
        serde_json::from_str(&fs::read_to_string(run.join("genome_layout.json")).unwrap()).unwrap();
    assert_eq!(layout["len"], 167);
    assert!(run.join("predictors.json").exists());
    assert!(fs::read_dir(&run)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().contains(".tmp")));
}

#[test]
fn same_seed_same_front() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", &SMALL.replace("\"out\"", "\"a\""));
    let b = write(dir.path(), "b.json", &SMALL.replace("\"out\"", "\"b\""));
    assert!(cimnet(&["run", &a], dir.path()).status.success());
    assert!(cimnet(&["run", &b], dir.path()).status.success());
    let fa = fs::read(dir.path().join("a/front.csv")).unwrap();
    let fb = fs::read(dir.path().join("b/front.csv")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn unknown_family_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        &SMALL.replace("\"mbv3\"", "\"mobilenet-v9\""),
    );
    let out = cimnet(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:2:"), "{err}");
    assert!(err.contains("`family`"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_field_and_bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "extra.json", &SMALL.replace("\"k\": 2", "\"kk\": 2"));
    let out = cimnet(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kk"));

    let cfg = write(
        dir.path(),
        "budget.json",
        &SMALL.replace("\"k\": 2", "\"k\": 2, \"eval_budget\": 10"),
    );
    let out = cimnet(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`eval_budget`"));

    let cfg = write(dir.path(), "m.json", &SMALL.replace("\"m\": 120", "\"m\": 10"));
    assert_eq!(cimnet(&["run", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn empty_config_space_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "\"k\": 2",
        "\"k\": 2, \"config_space\": {\"memory_budget\": [4.0, 8.0]}",
    );
    let cfg = write(dir.path(), "inf.json", &text);
    let out = cimnet(&["run", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn search_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = cimnet(
        &[
            "search",
            "--setting",
            "elastic-arch-static-config",
            "--family",
            "vit",
            "--k",
            "2",
            "--m",
            "60",
            "--n",
            "20",
            "--seed",
            "7",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["setting"], "elastic-arch-static-config");
    assert!(dir.path().join("run/front.csv").exists());
    let bad = cimnet(&["search", "--family", "vgg"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_and_dataflow() {
    let dir = tempfile::tempdir().unwrap();
    let out = cimnet(&["simulate", "--family", "resnet50"], dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["total_cycles"].as_u64().unwrap() > 0);
    assert_eq!(v["within_budget"], false);

    let hw = write(
        dir.path(),
        "hw.json",
        r#"{"multipliers": {"dram_bw": 1, "l2_bw": 1, "l1_bw": 1, "l1_num_child": 0.5, "ma_bw": 1, "ma_mem_size": 1, "ma_num_child": 0.5, "ma_comp_per_core": 0.5}}"#,
    );
    let fast = cimnet(&["simulate", "--family", "resnet50", "--config", &hw], dir.path());
    let f: Value = serde_json::from_slice(&fast.stdout).unwrap();
    assert_eq!(f["within_budget"], true);
    assert!(f["total_cycles"].as_u64() < v["total_cycles"].as_u64());

    let out = cimnet(
        &["dataflow", "--layer", "1,196,768,768", "--config", &hw],
        dir.path(),
    );
    assert!(out.status.success());
    let d: Value = serde_json::from_slice(&out.stdout).unwrap();
    let best = d["chosen"]["cost"]["cycles"].as_u64().unwrap();
    let options = d["options"].as_array().unwrap();
    assert!(options.len() > 1);
    assert!(options
        .iter()
        .all(|o| o["cost"]["cycles"].as_u64().unwrap() >= best));

    let bad = cimnet(&["dataflow", "--layer", "1,2,x"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn pareto_merges_fronts() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "a.csv",
        "genome_id,accuracy,cycles,genome\na,0.7,100,01\nb,0.8,300,10\n",
    );
    write(
        dir.path(),
        "b.csv",
        "genome_id,accuracy,cycles,genome\nc,0.75,90,11\n",
    );
    let out = cimnet(&["pareto", "a.csv", "b.csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "genome_id,accuracy,cycles,genome\nc,0.75,90,11\nb,0.8,300,10\n"
    );
}

#[test]
fn predictors_eval_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = cimnet(
        &[
            "predictors-eval",
            "--family",
            "vit",
            "--setting",
            "static-arch-elastic-config",
            "--pool",
            "120",
            "--sizes",
            "20,50",
            "--trials",
            "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap(),
        vec![
            "family",
            "setting",
            "model",
            "target",
            "n_train",
            "n_test",
            "trials",
            "mape",
            "kendall_tau"
        ]
    );
    // Accuracy is constant when the architecture is frozen, so only cycles.
    assert_eq!(r.records().count(), 2);
}
