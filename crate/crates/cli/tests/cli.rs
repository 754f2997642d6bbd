use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use tlp_core::cost::lp_distance;
use tlp_core::distance::DistanceMatrix;
use tlp_core::io::{read_matrix, read_pnm, read_signal, write_matrix, write_pnm, write_signal};
use tlp_core::measure::{ImageRaster, Signal};

fn tlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = tlp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn signal_file(dir: &TempDir, name: &str, values: Vec<f64>) -> PathBuf {
    let p = dir.path().join(name);
    write_signal(&Signal::from_samples(values).unwrap(), &p).unwrap();
    p
}

fn wave(n: usize, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (6.0 * i as f64 / n as f64 + phase).sin())
        .collect()
}

#[test]
fn dist_of_identical_inputs_is_zero() {
    let dir = TempDir::new().unwrap();
    let f = signal_file(&dir, "f.csv", wave(40, 0.0));
    let doc = ok_json(&["dist", path(&f), path(&f)]);
    assert_eq!(doc["command"], "dist");
    assert!(doc["schema_version"].is_number());
    assert!(doc["result"]["distance"].as_f64().unwrap().abs() < 1e-7);
}

#[test]
fn dist_lp_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let f = signal_file(&dir, "f.csv", wave(50, 0.0));
    let g = signal_file(&dir, "g.csv", wave(50, 0.7));
    let doc = ok_json(&["dist", path(&f), path(&g), "--method", "lp", "--p", "3"]);
    let want = lp_distance(&read_signal(&f).unwrap(), &read_signal(&g).unwrap(), 3.0).unwrap();
    let got = doc["result"]["distance"].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

#[test]
fn tlp_lies_below_lp() {
    let dir = TempDir::new().unwrap();
    let f = signal_file(&dir, "f.csv", wave(30, 0.0));
    let g = signal_file(&dir, "g.csv", wave(30, 1.0));
    let lp = ok_json(&["dist", path(&f), path(&g), "--method", "lp"]);
    let tl = ok_json(&["dist", path(&f), path(&g), "--lambda", "1"]);
    assert_eq!(tl["result"]["method"], "tlp");
    assert!(
        tl["result"]["distance"].as_f64().unwrap()
            <= lp["result"]["distance"].as_f64().unwrap() + 1e-12
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let f = signal_file(&dir, "f.csv", wave(10, 0.0));
    let missing = dir.path().join("missing.csv");
    let out = tlp(&["dist", path(&f), path(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert_eq!(tlp(&["dist", path(&f)]).status.code(), Some(2));
    assert_eq!(
        tlp(&["dist", path(&f), path(&f), "--lambda", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(tlp(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn pairwise_of_one_signal_is_a_zero_matrix() {
    let dir = TempDir::new().unwrap();
    let f = signal_file(&dir, "only.csv", wave(20, 0.0));
    let out = dir.path().join("m.csv");
    let doc = ok_json(&["pairwise", path(&f), "--out", path(&out)]);
    assert_eq!(doc["result"]["n"], 1);
    let m = read_matrix(&out).unwrap();
    assert_eq!(m.labels(), ["only"]);
    assert_eq!(m.values(), [0.0]);
}

#[test]
fn pairwise_does_not_depend_on_the_worker_count() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    ok_json(&[
        "synth",
        "--suite",
        "1d",
        "--count",
        "3",
        "--n",
        "48",
        "--seed",
        "5",
        "--out",
        path(&data),
    ]);
    let (one, four) = (dir.path().join("one.csv"), dir.path().join("four.csv"));
    ok_json(&[
        "--workers",
        "1",
        "pairwise",
        "--dataset",
        path(&data),
        "--out",
        path(&one),
    ]);
    ok_json(&[
        "--workers",
        "4",
        "pairwise",
        "--dataset",
        path(&data),
        "--out",
        path(&four),
    ]);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
    let m = read_matrix(&one).unwrap();
    assert_eq!(m.len(), 9);
    assert!(m.max_triangle_violation() <= 1e-7);
}

#[test]
fn mds_recovers_a_planar_configuration() {
    let dir = TempDir::new().unwrap();
    let pts: [(f64, f64); 6] = [
        (0.0, 0.0),
        (1.0, 0.0),
        (0.3, 2.0),
        (-1.0, 0.5),
        (2.0, 2.0),
        (0.7, -1.2),
    ];
    let n = pts.len();
    let values = (0..n * n)
        .map(|k| {
            let (a, b) = (pts[k / n], pts[k % n]);
            ((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)).sqrt()
        })
        .collect();
    let labels = (0..n).map(|i| format!("p{i}")).collect();
    let m = DistanceMatrix::new(labels, values, None).unwrap();
    let (mpath, coords) = (dir.path().join("m.csv"), dir.path().join("c.csv"));
    write_matrix(&m, &mpath).unwrap();
    let doc = ok_json(&[
        "mds",
        "--matrix",
        path(&mpath),
        "--k",
        "2",
        "--out",
        path(&coords),
    ]);
    assert!(doc["result"]["relative_stress"].as_f64().unwrap() < 1e-6);
    let text = fs::read_to_string(&coords).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), n);
    for i in 0..n {
        for j in 0..n {
            let d = ((rows[i][0] - rows[j][0]).powi(2) + (rows[i][1] - rows[j][1]).powi(2)).sqrt();
            assert!((d - m.get(i, j)).abs() < 1e-7);
        }
    }
}

#[test]
fn classify_separates_distinct_clusters() {
    let dir = TempDir::new().unwrap();
    let labels: Vec<String> = ["a", "a", "a", "b", "b", "b"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let xs: [f64; 6] = [0.0, 0.1, 0.2, 5.0, 5.1, 5.3];
    let values = (0..36)
        .map(|k| (xs[k / 6] - xs[k % 6]).abs())
        .collect::<Vec<f64>>();
    let m = DistanceMatrix::new(labels, values, None).unwrap();
    let mpath = dir.path().join("m.csv");
    write_matrix(&m, &mpath).unwrap();
    let doc = ok_json(&["classify", "--matrix", path(&mpath), "--folds", "3"]);
    assert_eq!(doc["result"]["accuracy"].as_f64().unwrap(), 1.0);
}

#[test]
fn recolor_with_itself_returns_the_exemplar() {
    let dir = TempDir::new().unwrap();
    let pixels = (0..6 * 5 * 3)
        .map(|k| ((k * 37) % 255) as f64 / 255.0)
        .collect();
    let img = ImageRaster::new(6, 5, 3, pixels).unwrap();
    let (src, out) = (dir.path().join("a.ppm"), dir.path().join("out.ppm"));
    write_pnm(&img, &src, 255).unwrap();
    let doc = ok_json(&[
        "recolor",
        "--source",
        path(&src),
        "--exemplar",
        path(&src),
        "--out",
        path(&out),
    ]);
    assert_eq!(doc["result"]["is_permutation"], true);
    assert_eq!(read_pnm(&out).unwrap(), read_pnm(&src).unwrap());
}

#[test]
fn histspec_keeps_the_image_size() {
    let dir = TempDir::new().unwrap();
    let a = ImageRaster::new(4, 4, 1, (0..16).map(|k| k as f64 / 15.0).collect()).unwrap();
    let b = ImageRaster::new(3, 3, 1, (0..9).map(|k| (k % 3) as f64 / 2.0).collect()).unwrap();
    let (pa, pb, out) = (
        dir.path().join("a.pgm"),
        dir.path().join("b.pgm"),
        dir.path().join("o.pgm"),
    );
    write_pnm(&a, &pa, 255).unwrap();
    write_pnm(&b, &pb, 255).unwrap();
    ok_json(&[
        "histspec",
        "--source",
        path(&pa),
        "--exemplar",
        path(&pb),
        "--bins",
        "8",
        "--out",
        path(&out),
    ]);
    let o = read_pnm(&out).unwrap();
    assert_eq!((o.width(), o.height(), o.channels()), (4, 4, 1));
}

#[test]
fn bench_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = tlp(&[
            "bench",
            "--suite",
            "2d",
            "--count",
            "4",
            "--width",
            "6",
            "--height",
            "6",
            "--folds",
            "4",
            "--max-dims",
            "2",
            "--seed",
            "3",
            "--out",
            path(&out),
        ])
        .status;
        assert!(status.success());
        fs::read(out).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert_eq!(a, b);
    let doc: Value = serde_json::from_slice(&a).unwrap();
    let names: Vec<&str> = doc["result"]["summary"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["metric"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["L2", "OT", "TL2"]);
}

#[test]
fn synth_example_writes_a_pair() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ex");
    let doc = ok_json(&[
        "synth",
        "--suite",
        "example",
        "--kind",
        "high_freq",
        "--n",
        "64",
        "--out",
        path(&out),
    ]);
    assert_eq!(doc["result"]["items"], 2);
    assert!(out.join("labels.json").exists());
}
