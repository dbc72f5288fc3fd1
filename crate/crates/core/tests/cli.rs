use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semisparse::imageio::{self, Encoding};
use semisparse::synthetic::{ramp_step_scene, Stripes};
use semisparse::ChannelImage;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semisparse"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Scene squeezed into [0, 1] so it survives 8-bit storage.
fn scene_png(dir: &Path, name: &str, stripes: Stripes, phase: f64) -> PathBuf {
    let obs = ramp_step_scene(64, stripes, phase).observed;
    let data = obs.data().iter().map(|v| v * 0.55).collect();
    let img = ChannelImage::new(64, 64, 1, data).unwrap();
    let path = dir.join(name);
    imageio::write_image(&path, &img, Encoding::Direct).unwrap();
    path
}

#[test]
fn decompose_writes_requested_files() {
    let dir = TempDir::new().unwrap();
    let input = scene_png(dir.path(), "f.png", Stripes::Vertical, 0.0);
    let (u, v, m) = (dir.path().join("u.png"), dir.path().join("v.png"), dir.path().join("m.json"));
    let out = run(&[
        "decompose", "--input", path_str(&input),
        "--lambda", "0.005", "--alpha", "0.006", "--beta", "0.001",
        "--out-structure", path_str(&u), "--out-texture", path_str(&v),
        "--metrics-json", path_str(&m),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(imageio::read_image(&u).unwrap().width(), 64);
    assert_eq!(imageio::read_image(&v).unwrap().height(), 64);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    for key in ["str_db", "c0", "c1", "iterations", "converged", "wall_time_s", "config"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["config"]["lambda"], 0.005);
}

#[test]
fn missing_input_exits_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.png");
    let out = run(&[
        "decompose", "--input", path_str(&missing),
        "--out-structure", path_str(&dir.path().join("u.png")),
        "--out-texture", path_str(&dir.path().join("v.png")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.png"));
}

#[test]
fn bad_flags_exit_two() {
    let out = run(&["decompose", "--input", "x.png", "--out-structure", "u.png", "--out-texture", "v.png", "--order", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["decompose", "--input", "x.png", "--out-structure", "u.png", "--out-texture", "v.png", "--gamma", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(run(&["--help"]).status.success());
    assert!(run(&["benchmark", "--help"]).status.success());
}

#[test]
fn hinv_constant_image_round_trips() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("flat.png");
    let flat = ChannelImage::constant(24, 16, 3, 100.0 / 255.0).unwrap();
    imageio::write_image(&input, &flat, Encoding::Direct).unwrap();
    let (u, v) = (dir.path().join("u.png"), dir.path().join("v.png"));
    let out = run(&[
        "decompose", "--model", "hinv", "--input", path_str(&input),
        "--out-structure", path_str(&u), "--out-texture", path_str(&v),
    ]);
    assert!(out.status.success());
    assert_eq!(imageio::read_image(&u).unwrap(), imageio::read_image(&input).unwrap());
    assert!(imageio::read_image(&v).unwrap().to_bytes().iter().all(|&b| b == 128));
}

fn benchmark(dir: &Path, corpus: &Path, plan: &str) -> (Output, PathBuf, PathBuf) {
    let cfg = dir.join("plan.txt");
    fs::write(&cfg, plan).unwrap();
    let (csv, json) = (dir.join("report.csv"), dir.join("report.json"));
    let out = run(&[
        "benchmark", "--corpus", path_str(corpus), "--config", path_str(&cfg),
        "--out-csv", path_str(&csv), "--out-json", path_str(&json),
    ]);
    (out, csv, json)
}

fn read_rows(csv: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(csv).unwrap();
    r.records().map(|r| r.unwrap()).collect()
}

#[test]
fn benchmark_matches_target_str() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    for (i, s) in [Stripes::Vertical, Stripes::Horizontal, Stripes::Diagonal].into_iter().enumerate() {
        scene_png(&corpus, &format!("s{i}.png"), s, 0.1 * i as f64);
    }
    let plan = "target_str = 19.23\n\n[config]\nname = ours\n\n[config]\nname = tv-l1\nbeta = 0\n";
    let (out, csv, json) = benchmark(dir.path(), &corpus, plan);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&csv);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(&r[8], "ok", "{r:?}");
        let s: f64 = r[11].parse().unwrap();
        assert!((s - 19.23).abs() <= 0.1, "{s}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 2);

    let first = fs::read(&csv).unwrap();
    let (_, csv2, _) = benchmark(dir.path(), &corpus, plan);
    assert_eq!(fs::read(&csv2).unwrap(), first);
}

#[test]
fn benchmark_records_tuning_failure() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    scene_png(&corpus, "one.png", Stripes::Vertical, 0.0);
    // fidelity pinned so hard that no alpha in the bracket smooths anything
    let plan = "target_str = 19.23\n[config]\nname = ours\n[config]\nname = pinned\nlambda = 1000\nrho1 = 1000\ntune = alpha\n";
    let (out, csv, _) = benchmark(dir.path(), &corpus, plan);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][8], "ok");
    assert_eq!(&rows[1][8], "failed");
    assert!(!rows[1][14].is_empty());
}

#[test]
fn empty_corpus_exits_one() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("empty");
    fs::create_dir(&corpus).unwrap();
    let (out, _, _) = benchmark(dir.path(), &corpus, "target_str = 19.23\n[config]\n");
    assert_eq!(out.status.code(), Some(1));
}
