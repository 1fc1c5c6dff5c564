use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rul_core::dataio::{save_checkpoint, save_dataset, BearingMeta, Checkpoint};
use rul_core::features::{Channel, LabeledSample, Window, WpdImage};
use rul_core::model::{Model, ModelConfig};
use serde_json::Value;

fn rul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rul")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    text.trim_end().to_string()
}

#[test]
fn synth_then_fpt_finds_the_onset() {
    let root = tempfile::tempdir().unwrap();
    let synth = root.path().join("synth");
    let out = rul(&["synth", "--snapshots", "100", "--onset", "50", "--seed", "7", "--out-dir", &s(&synth)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fpt_dir = root.path().join("fpt");
    let out = rul(&["fpt", "--record", &s(&synth.join("record.rrec")), "--out-dir", &s(&fpt_dir)]);
    assert!(out.status.success());
    let fpt = json(&fpt_dir.join("fpt.json"))["fpt"].as_u64().unwrap();
    assert!((47..=53).contains(&fpt), "{fpt}");
    assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("fpt: {fpt}")));
    let csv = fs::read_to_string(fpt_dir.join("kurtosis.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    let manifest = json(&fpt_dir.join("manifest.json"));
    assert_eq!(manifest["invocation"]["command"], "fpt");
    assert!(manifest["configs"].get("fpt").is_some());
}

fn constant_samples(n: usize, label: f32) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| {
            let img = |channel| WpdImage {
                side: 32,
                pixels: (0..1024).map(|p| ((p * 7 + i * 13) % 17) as f32 / 16.0).collect(),
                channel,
                source_window: Window { start: 5 * i, size: 10 },
            };
            LabeledSample { hor: img(Channel::Horizontal), ver: img(Channel::Vertical), label, bearing_id: "exact".into() }
        })
        .collect()
}

#[test]
fn eval_of_an_exact_model_reports_zero_error() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data.rds");
    let samples = constant_samples(6, 0.5);
    let bearings = [BearingMeta { bearing_id: "exact".into(), fpt: Some(3) }];
    save_dataset(&data, &samples, &bearings, None).unwrap();

    let cfg = ModelConfig::desk();
    let mut params = Model::new(cfg.clone()).unwrap().init_params(1);
    params.get_mut("head.out.weight").unwrap().data_mut().fill(0.0);
    params.get_mut("head.out.bias").unwrap().data_mut()[0] = 0.5;
    let ckpt = root.path().join("model.ckpt");
    save_checkpoint(&ckpt, &Checkpoint { model: cfg, params, extra: Value::Null }).unwrap();

    let eval_dir = root.path().join("eval");
    let out = rul(&["eval", "--checkpoint", &s(&ckpt), "--data", &s(&data), "--out-dir", &s(&eval_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&eval_dir.join("metrics.json"));
    assert_eq!(m["mae"], 0.0);
    assert_eq!(m["score_mean"], 0.0);
    assert_eq!(m["late_fraction"], 0.0);
    assert_eq!(m["n"], 6);

    let pred_dir = root.path().join("pred");
    assert!(rul(&["predict", "--checkpoint", &s(&ckpt), "--data", &s(&data), "--out-dir", &s(&pred_dir)]).status.success());
    let csv = fs::read_to_string(pred_dir.join("predictions.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("window_index,true_rul,pred_rul,error"));
    assert_eq!(lines.next(), Some("0,0.5,0.5,0"));
    assert!(fs::read_to_string(pred_dir.join("predictions.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn exit_codes_follow_error_kinds() {
    let root = tempfile::tempdir().unwrap();
    let out = rul(&["train", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[Usage]"));

    let out = rul(&["ingest", "--dir", &s(&root.path().join("absent")), "--out-dir", &s(&root.path().join("x"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).starts_with("error[MissingDirectory]"));
    assert!(!root.path().join("x").exists());

    let out = rul(&["synth", "--onset", "500", "--out-dir", &s(&root.path().join("y"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[InvalidConfig]"));
}

#[test]
fn diverging_training_exits_numeric_and_leaves_nothing() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data.rds");
    let samples: Vec<LabeledSample> = constant_samples(4, 0.25);
    save_dataset(&data, &samples, &[BearingMeta { bearing_id: "exact".into(), fpt: Some(0) }], None).unwrap();
    let out_dir = root.path().join("train");
    let out = rul(&[
        "train", "--data", &s(&data), "--out-dir", &s(&out_dir), "--preset", "desk", "--lr", "1e300", "--epochs", "2", "--batch", "2",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stderr_line(&out).starts_with("error[DivergedLoss]"));
    assert!(!out_dir.exists());

    let existing = root.path().join("keep");
    fs::create_dir(&existing).unwrap();
    fs::write(existing.join("notes.txt"), "mine").unwrap();
    let out = rul(&[
        "train", "--data", &s(&data), "--out-dir", &s(&existing), "--preset", "desk", "--lr", "1e300", "--epochs", "2", "--batch", "2",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let left: Vec<_> = fs::read_dir(&existing).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("notes.txt")]);
}

#[test]
fn config_file_values_yield_to_flags() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("run.json");
    fs::write(&config, r#"{"snapshots": 30, "samples": 256, "onset": 20, "seed": 3}"#).unwrap();
    let out_dir = root.path().join("synth");
    let out = rul(&["--config", &s(&config), "synth", "--seed", "4", "--out-dir", &s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let inv = &json(&out_dir.join("manifest.json"))["invocation"];
    let synth = &inv["synthetic"];
    assert_eq!((synth["snapshots"].as_u64(), synth["samples"].as_u64(), inv["seed"].as_u64()), (Some(30), Some(256), Some(4)));
}

#[test]
fn help_lists_reference_defaults() {
    let text = |args: &[&str]| String::from_utf8(rul(args).stdout).unwrap();
    let train = text(&["train", "--help"]);
    for want in ["[default: 0.0001]", "[default: 16]", "[default: 0.3]", "[default: 100]"] {
        assert!(train.contains(want), "{want} missing from\n{train}");
    }
    let featurize = text(&["featurize", "--help"]);
    for want in ["--window <WINDOW>", "[default: 10]", "[default: 5]", "[default: 3]"] {
        assert!(featurize.contains(want), "{want} missing from\n{featurize}");
    }
}

#[test]
fn loss_experiment_reduces_late_predictions() {
    let root = tempfile::tempdir().unwrap();
    let out_dir = root.path().join("exp");
    let out = rul(&["exp-loss", "--seed", "3", "--lambda", "1.0", "--out-dir", &s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out_dir.join("comparison.json"));
    let late = |k: &str| report[k]["late_fraction"].as_f64().unwrap();
    assert!(late("custom") <= late("mse"), "{report}");
    let delta = report["delta_late_fraction"].as_f64().unwrap();
    assert_eq!(delta, late("custom") - late("mse"));
}
