use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gmd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = gmd(args, cwd);
    assert!(
        out.status.success(),
        "gmd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// All files under `root`, relative and sorted.
fn tree(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn harmonic_decomposes_into_one_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--samples", "2048", "generate", "harmonic", "--N", "40", "-o", "h.csv"], d);
    assert!(d.join("h.csv.json").is_file());
    ok(&["decompose", "h.csv", "-o", "out"], d);
    let report = json(d.join("out/report.json"));
    assert_eq!(report["K"], 1);
    assert_eq!(report["classes"][0]["n0"], 1);
}

#[test]
fn example1_has_two_modes_and_every_csv_has_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--samples", "4096", "generate", "example1", "-o", "ex1.csv"], d);
    ok(&["decompose", "ex1.csv", "-o", "out"], d);
    let out = d.join("out");
    assert_eq!(json(out.join("report.json"))["K"], 2);
    assert_eq!(json(out.join("classification.json"))["K"], 2);
    let files = tree(&out);
    for name in ["plane.csv", "squeezed.csv", "supports.csv", "residual_history.csv", "modes/0.csv", "modes/1.csv"] {
        assert!(files.contains(&PathBuf::from(name)), "missing {name}");
    }
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
        let car = out.join(format!("{}.json", f.display()));
        let v = json(&car);
        assert_eq!(v["command"], "decompose");
        assert_eq!(v["config"]["s"], 2.0 / 3.0);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--samples", "4096", "--snr-db", "10", "--seed", "5", "generate", "example1", "-o", "f.csv"], d);
    ok(&["decompose", "f.csv", "-o", "a"], d);
    ok(&["decompose", "f.csv", "-o", "b"], d);
    let (a, b) = (tree(&d.join("a")), tree(&d.join("b")));
    assert_eq!(a, b);
    for f in &a {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{}", f.display());
    }
}

#[test]
fn noise_depends_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (seed, name) in [("1", "a.csv"), ("1", "b.csv"), ("2", "c.csv")] {
        ok(&["--samples", "1024", "--snr-db", "0", "--seed", seed, "generate", "harmonic", "--N", "20", "-o", name], d);
    }
    let read = |n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), r#"{"d": 0.5, "samples": 1024}"#).unwrap();
    ok(&["--config", "c.json", "--d", "0.8", "generate", "harmonic", "--N", "30", "-o", "h.csv"], d);
    let car = json(d.join("h.csv.json"));
    assert_eq!(car["config"]["d"], 0.8);
    assert_eq!(car["config"]["samples"], 1024);
    let lines = fs::read_to_string(d.join("h.csv")).unwrap().lines().count();
    assert_eq!(lines, 1025);
}

#[test]
fn spec_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = r#"{
        "samples": 1024,
        "modes": [{
            "shape": [[1, 1.0, 0.0]],
            "amplitude": {"poly": [1.0], "sines": []},
            "wavenumber": 25.0,
            "phase": {"poly": [0.0, 1.0], "sines": []}
        }]
    }"#;
    fs::write(d.join("spec.json"), spec).unwrap();
    ok(&["generate", "spec.json", "-o", "s.csv"], d);
    ok(&["transform", "s.csv", "-o", "tr"], d);
    ok(&["squeeze", "s.csv", "-o", "sq"], d);
    assert!(d.join("tr/plane.csv.json").is_file());
    assert!(d.join("sq/squeezed_log10.csv").is_file());
    // the energy of a pure tone sits on its wavenumber
    let mut r = csv::Reader::from_path(d.join("sq/squeezed.csv")).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for rec in r.records() {
        let rec = rec.unwrap();
        let v: f64 = rec[1].parse().unwrap();
        let e: f64 = rec[2].parse().unwrap();
        num += v * e;
        den += e;
    }
    assert!((num / den - 25.0).abs() < 0.5, "{}", num / den);
}

#[test]
fn dsa_accepts_curve_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--samples", "1024", "generate", "harmonic", "--N", "20", "-o", "h.csv"], d);
    let mut curve = String::from("t,if\n");
    for j in 0..1024 {
        curve.push_str(&format!("{},20\n", j as f64 / 1024.0));
    }
    fs::write(d.join("curve.csv"), curve).unwrap();
    ok(&["dsa", "h.csv", "--curve", "curve.csv", "-o", "out"], d);
    let history: Vec<f64> = csv::Reader::from_path(d.join("out/residual_history.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert!(history.last().unwrap() / history[0] < 1e-6, "{history:?}");
    assert!(d.join("out/spectrum/0.csv").is_file());

    fs::write(d.join("short.csv"), "t,if\n0,20\n").unwrap();
    assert!(!gmd(&["dsa", "h.csv", "--curve", "short.csv", "-o", "bad"], d).status.success());
}

#[test]
fn detrend_removes_a_ramp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut text = String::from("t,re,im\n");
    for j in 0..256 {
        let t = j as f64 / 256.0;
        text.push_str(&format!("{t},{},{}\n", 1.0 + 2.0 * t, -t));
    }
    fs::write(d.join("ramp.csv"), text).unwrap();
    ok(&["detrend", "ramp.csv", "-o", "rest.csv", "--trend", "line.csv"], d);
    let mut r = csv::Reader::from_path(d.join("rest.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let re: f64 = rec[1].parse().unwrap();
        let im: f64 = rec[2].parse().unwrap();
        assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
    }
    assert_eq!(json(d.join("line.csv.json"))["command"], "detrend");
}

#[test]
fn resolution_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["resolution", "--N", "100"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n0"], 3);
    let out = ok(&["--d", "0.3", "resolution", "--N", "100"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["n0"].as_u64().unwrap() > 3);
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = gmd(&["generate", "nope", "-o", "x.csv"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    assert!(!gmd(&["decompose", "missing.csv", "-o", "o"], d).status.success());
    fs::write(d.join("zero.csv"), "t,re,im\n0,0,0\n0.5,0,0\n").unwrap();
    assert!(!gmd(&["decompose", "zero.csv", "-o", "o"], d).status.success());
}
