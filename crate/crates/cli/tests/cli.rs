use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"{
  "dataset": { "source": { "kind": "synth_ecg", "n_records": 120 } },
  "features": ["rr"],
  "model": {
    "input_len": 720, "channels": 4, "dilations": [2, 4, 8], "head_channels": [4, 8],
    "dropout": 0.0, "epochs": 2, "batch_size": 16
  },
  "lambda": { "kind": "fixed", "lambda": 10.0 },
  "cam": { "landmark_source": "ground_truth", "intensities_ms": [0, 100] },
  "eval": { "probe": { "hidden": [8, 8], "epochs": 2, "batch_size": 16, "lr": 0.001, "seed": 0 }, "probe_features": ["rr"] },
  "seed": 3
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indepcam"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("tiny.json");
    fs::write(&config, TINY).unwrap();
    Workspace { _dir: dir, root, config }
}

#[test]
fn full_pipeline() {
    let w = workspace();
    let (cfg, r) = (s(&w.config), &w.root);
    let data = r.join("data");
    ok(&["synth", "--config", cfg, "--out", s(&data)]);
    let manifest = data.join("manifest.json");
    let truth = data.join("ground_truth.json");
    assert!(manifest.exists() && truth.exists() && data.join("run_manifest.json").exists());

    let feats = r.join("features.csv");
    ok(&["features", "--config", cfg, "--out", s(&feats), "--manifest", s(&manifest)]);
    let table = fs::read_to_string(&feats).unwrap();
    assert!(table.starts_with("id,rr_median,"));
    assert_eq!(table.lines().count(), 121);

    let rr = r.join("rr");
    let common = ["--config", cfg, "--manifest", s(&manifest), "--truth", s(&truth)];
    ok(&[&["train", "--out", s(&rr), "--name", "rr", "--features", s(&feats)][..], &common[..]].concat());
    for f in ["train_log.csv", "train_log.json", "model.ckpt", "metrics.json", "run_manifest.json"] {
        assert!(rr.join(f).exists(), "{f}");
    }
    let base = r.join("base");
    ok(&[
        &["train", "--out", s(&base), "--name", "base", "--set", "features=[]", "--set", r#"lambda={"kind":"fixed","lambda":0}"#][..],
        &common[..],
    ]
    .concat());

    let ev = r.join("eval");
    ok(&[&["eval", "--out", s(&ev), "--name", "rr", "--checkpoint", s(&rr.join("model.ckpt"))][..], &common[..]].concat());
    assert_eq!(fs::read(ev.join("metrics.json")).unwrap(), fs::read(rr.join("metrics.json")).unwrap());

    let cam = r.join("cam");
    let b = format!("base={}", s(&base.join("model.ckpt")));
    let a = format!("rr={}", s(&rr.join("model.ckpt")));
    ok(&[&["cam", "--out", s(&cam), "--checkpoint", &b, "--checkpoint", &a][..], &common[..]].concat());
    for f in ["template_base.csv", "template_rr.csv", "event_counts.json", "ttests.json"] {
        assert!(cam.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(cam.join("template_rr.csv")).unwrap().starts_with("time_ms,activation\n"));

    let noise = r.join("noise");
    ok(&[&["noise", "--out", s(&noise), "--checkpoint", s(&rr.join("model.ckpt"))][..], &common[..]].concat());
    assert!(noise.join("template_noise_0ms.csv").exists() && noise.join("template_noise_100ms.csv").exists());
    let nj: serde_json::Value = serde_json::from_slice(&fs::read(noise.join("noise.json")).unwrap()).unwrap();
    assert_eq!(nj["prominence"].as_array().unwrap().len(), 2);

    let report = r.join("report.csv");
    ok(&["report", "--out", s(&report), "--inputs", s(&base.join("metrics.json")), s(&rr.join("metrics.json"))]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("model,accuracy,f1,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn rerun_gives_identical_metrics() {
    let w = workspace();
    let (a, b) = (w.root.join("a"), w.root.join("b"));
    ok(&["train", "--config", s(&w.config), "--out", s(&a)]);
    ok(&["train", "--config", s(&w.config), "--out", s(&b)]);
    assert_eq!(fs::read(a.join("metrics.json")).unwrap(), fs::read(b.join("metrics.json")).unwrap());
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
    let c = w.root.join("c");
    ok(&["train", "--config", s(&w.config), "--out", s(&c), "--seed", "4"]);
    assert_ne!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(c.join("model.ckpt")).unwrap());
}

#[test]
fn exit_codes() {
    let w = workspace();
    let x = w.root.join("x");
    let out = s(&x);
    assert_eq!(run(&["train", "--config", s(&w.config), "--out", out, "--set", "model.epochz=1"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--config", s(&w.root.join("nope.json")), "--out", out]).status.code(), Some(3));
    assert_eq!(
        run(&["train", "--config", s(&w.config), "--out", out, "--manifest", s(&w.root.join("nope.json"))]).status.code(),
        Some(3)
    );
    assert_eq!(run(&["train", "--config", s(&w.config), "--out", out, "--set", "model.input_len=100"]).status.code(), Some(3));
    assert_eq!(run(&["sweep", "--config", s(&w.config), "--out", out, "--set", "sweep.lambdas=[1]"]).status.code(), Some(2));
    assert!(!run(&["bogus"]).status.success());
}
