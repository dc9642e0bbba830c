//! Black-box tests of the command-line interface: exit codes, artifact
//! layout, frozen CSV headers, and byte-level determinism across reruns.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_thermoshift")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("thermoshift-cli-{}-{}", name, std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn thermoshift")
}

fn write_cfg(dir: &PathBuf, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["pressure", "--help"]).status.code(), Some(0));
}

#[test]
fn missing_and_invalid_configs_exit_two() {
    let dir = scratch("badcfg");
    let out = run(&["pressure", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "no --config must exit 2");

    let empty = write_cfg(&dir, "{}");
    let out = run(&["rate", "--config", &empty, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "empty config must exit 2");

    let junk = dir.join("junk.json");
    fs::write(&junk, "not json").unwrap();
    let out = run(&["rate", "--config", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "unparseable config must exit 2");

    let out = run(&["deviate", "--config", &empty, "--workers", "0"]);
    assert_eq!(out.status.code(), Some(2), "workers 0 must exit 2");
}

#[test]
fn rate_csv_layout_and_sanov_point() {
    let dir = scratch("rate");
    let cfg = write_cfg(
        &dir,
        r#"{
            "shift": {"alphabet_size": 2, "transition": "full"},
            "potential": {"kind": "bernoulli", "weights": [0.3, 0.7]},
            "observable": {"kind": "indicator", "symbol": 0},
            "rate": {
                "beta_grid": {"min": -8.0, "max": 8.0, "steps": 33},
                "alphas": [0.3, 0.5],
                "method": {"kind": "block_matrix", "iters": 3000, "tolerance": 1e-11}
            }
        }"#,
    );
    let out = run(&["rate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.join("rate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha,I,beta_star"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);

    // I(0.3) = 0 at the mean; I(0.5) = 0.5 ln(0.5/0.3) + 0.5 ln(0.5/0.7).
    let exact = 0.5 * (0.5f64 / 0.3).ln() + 0.5 * (0.5f64 / 0.7).ln();
    let i03: f64 = rows[0][1].parse().unwrap();
    let i05: f64 = rows[1][1].parse().unwrap();
    assert!(i03.abs() < 1e-6, "I(0.3) = {:e}", i03);
    assert!((i05 - exact).abs() < 1e-4, "I(0.5) = {} vs {}", i05, exact);

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("rate.json")).unwrap()).unwrap();
    assert!(doc.get("seed").is_some());
    assert!(
        doc.get("points")
            .and_then(|p| p.as_array())
            .map(|a| a.len())
            == Some(2)
    );
}

#[test]
fn pressure_periodic_row_is_exact() {
    let dir = scratch("pressure");
    let cfg = write_cfg(
        &dir,
        r#"{
            "shift": {"alphabet_size": 2, "transition": [[1, 1], [1, 0]]},
            "potential": {"kind": "bernoulli", "weights": [1.0, 1.0]},
            "pressure": {"n": 12, "ensembles": ["periodic"]}
        }"#,
    );
    let out = run(&["pressure", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.join("pressure.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,ensemble,value,lo,hi"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "12");
    assert_eq!(row[1], "periodic");
    // Fixed points of the 12th power of the golden-mean shift: the trace
    // of A^12 is the Lucas number 322.
    let v: f64 = row[2].parse().unwrap();
    assert!(
        (v - 322f64.ln() / 12.0).abs() < 1e-13,
        "periodic value {}",
        v
    );
}

#[test]
fn deviate_artifacts_are_deterministic() {
    // Same config, same seed, two output directories: artifacts must be
    // byte-identical, and a different worker count must not change them.
    let dir = scratch("deviate");
    let cfg = write_cfg(
        &dir,
        r#"{
            "shift": {"alphabet_size": 2, "transition": [[1, 1], [1, 0]]},
            "potential": {"kind": "bernoulli", "weights": [1.0, 1.0]},
            "observable": {"kind": "indicator", "symbol": 1},
            "deviate": {
                "side": "at_least",
                "alpha": 0.4,
                "n": 12,
                "anchor": {"symbols": [0]}
            }
        }"#,
    );
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    for (o, workers) in [(&out1, "1"), (&out2, "3")] {
        let out = run(&[
            "deviate",
            "--config",
            &cfg,
            "--out",
            o.to_str().unwrap(),
            "--seed",
            "11",
            "--workers",
            workers,
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["deviate.json", "deviate.csv"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{} differs between reruns", name);
    }

    let csv = fs::read_to_string(out1.join("deviate.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,ensemble,value,lo,hi"));

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("deviate.json")).unwrap()).unwrap();
    assert_eq!(doc["seed"], serde_json::json!(11));
    let recs = doc["records"].as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for r in recs {
        assert!(r["value"].as_f64().unwrap() < 0.0);
    }
}

#[test]
fn mc_runs_are_seed_reproducible() {
    let dir = scratch("mc");
    let cfg = write_cfg(
        &dir,
        r#"{
            "model": {"kind": "gauss"},
            "observable": {"kind": "indicator", "digit": 1},
            "mc": {"side": "at_least", "alpha": 0.7, "n": 12, "trials": 2000}
        }"#,
    );
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    for o in [&out1, &out2] {
        let out = run(&[
            "mc",
            "--config",
            &cfg,
            "--out",
            o.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = fs::read(out1.join("mc.json")).unwrap();
    let b = fs::read(out2.join("mc.json")).unwrap();
    assert_eq!(a, b, "same seed must reproduce mc.json byte for byte");

    let out3 = dir.join("run3");
    let out = run(&[
        "mc",
        "--config",
        &cfg,
        "--out",
        out3.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let c = fs::read(out3.join("mc.json")).unwrap();
    assert_ne!(a, c, "a different seed must change the sample");
}

#[test]
fn cfrac_cylinder_reports_exact_interval() {
    let dir = scratch("cfrac");
    let cfg = write_cfg(&dir, r#"{"cfrac": {"word": [2, 3]}}"#);
    let out = run(&[
        "cfrac",
        "cylinder",
        "--config",
        &cfg,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("cfrac_cylinder.json")).unwrap())
            .unwrap();
    // [2, 3]: endpoints 1/(2 + 1/3) = 3/7 and 1/(2 + 1/4) = 4/9,
    // length 1/63.
    assert_eq!(doc["lo"]["num"], "3");
    assert_eq!(doc["lo"]["den"], "7");
    assert_eq!(doc["hi"]["num"], "4");
    assert_eq!(doc["hi"]["den"], "9");
    assert_eq!(doc["length"]["num"], "1");
    assert_eq!(doc["length"]["den"], "63");
}
