// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_strata-walk"));
    c.env_remove("STRATA_WALK_THREADS");
    c
}

fn sinai_config(alpha: Option<f64>, seed: u64) -> Value {
    let drift = match alpha {
        Some(a) => json!({ "type": "stretch_exp", "c": 1.0, "alpha": a }),
        None => json!({ "type": "zero" }),
    };
    json!({
        "environment": {
            "dimension": 1,
            "eta": 0.2,
            "ratio_law": { "type": "atoms", "atoms": [{ "value": 2.0, "prob": 0.5 }, { "value": 0.5, "prob": 0.5 }] },
            "r_law": { "type": "constant", "value": 1.0 / 3.0 },
            "drift_model": drift,
            "seed": seed
        },
        "analysis": { "window": { "levels": 100000 } }
    })
}

fn flat_config() -> Value {
    json!({
        "environment": {
            "dimension": 1,
            "eta": 0.2,
            "ratio_law": { "type": "constant", "value": 1.0 },
            "r_law": { "type": "constant", "value": 1.0 / 3.0 },
            "drift_model": { "type": "zero" },
            "seed": 7
        },
        "analysis": { "window": { "n_minus": 200000, "n_plus": 200000 } }
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config-in.json");
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// File name to contents, manifest excluded.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn gen_env_flat_rows_are_thirds() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = flat_config();
    cfg["analysis"]["window"] = json!({ "n_minus": 5, "n_plus": 5 });
    let c = write_config(tmp.path(), &cfg);
    let o = run("gen-env", &c, &tmp.path().join("o"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = strata_walk_cli::output::csv_reader(&tmp.path().join("o/window.csv")).unwrap();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        for col in 1..=3 {
            let x: f64 = rec[col].parse().unwrap();
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(&rec[4], "0");
        rows += 1;
    }
    assert_eq!(rows, 11);
    assert_eq!(read_json(&tmp.path().join("o/validation.json"))["passed"], json!(true));
}

#[test]
fn gen_env_rejects_infeasible_eta() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = flat_config();
    cfg["environment"]["eta"] = json!(0.4);
    cfg["environment"]["r_law"] = json!({ "type": "constant", "value": 0.3 });
    let c = write_config(tmp.path(), &cfg);
    let o = run("gen-env", &c, &tmp.path().join("o"), &[]);
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn gen_env_lists_violating_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = flat_config();
    cfg["analysis"]["window"] = json!({ "n_minus": 3, "n_plus": 3 });
    // mass at zero 0.9 exceeds 1 - eta on every level
    cfg["environment"]["jump_law"] = json!({ "type": "fixed", "atoms": [
        { "offset": [0], "weight": 0.9 }, { "offset": [1], "weight": 0.05 }, { "offset": [-1], "weight": 0.05 }
    ]});
    let c = write_config(tmp.path(), &cfg);
    let o = run("gen-env", &c, &tmp.path().join("o"), &[]);
    assert_eq!(code(&o), 2);
    let v = read_json(&tmp.path().join("o/validation.json"));
    assert_eq!(v["violating_levels"], json!([-3, -2, -1, 0, 1, 2, 3]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("-3, -2, -1, 0, 1, 2, 3"));
}

#[test]
fn gen_env_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(None, 7);
    cfg["analysis"]["window"] = json!({ "n_minus": 500, "n_plus": 500 });
    let c = write_config(tmp.path(), &cfg);
    for d in ["a", "b"] {
        assert_eq!(code(&run("gen-env", &c, &tmp.path().join(d), &[])), 0);
    }
    assert_eq!(snapshot(&tmp.path().join("a")), snapshot(&tmp.path().join("b")));
}

#[test]
fn analyze_flat_is_recurrent() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), &flat_config());
    let o = run("analyze", &c, &tmp.path().join("o"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&tmp.path().join("o/verdict.json"));
    assert_eq!(v["label"], json!("recurrent-indicative"));
    assert_eq!(v["provenance"]["seeds"]["environment"], json!(7));
}

#[test]
fn analyze_sinai_alpha_split() {
    let tmp = tempfile::tempdir().unwrap();
    for (alpha, want) in [(0.25, "transient-indicative"), (0.75, "recurrent-indicative")] {
        let c = write_config(tmp.path(), &sinai_config(Some(alpha), 0));
        let out = tmp.path().join(format!("a{alpha}"));
        let o = run("analyze", &c, &out, &["--format", "json"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read_json(&out.join("verdict.json"))["label"], json!(want), "alpha {alpha}");
        assert!(out.join("series.json").exists());
        assert!(!out.join("series.csv").exists());
    }
}

#[test]
fn analyze_out_of_window_suggests_more_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(Some(0.25), 0);
    cfg["analysis"] = json!({ "window": { "levels": 100 }, "grid": { "k": 13, "j_max": 30 } });
    let c = write_config(tmp.path(), &cfg);
    let o = run("analyze", &c, &tmp.path().join("o"), &[]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    let payload: Value = serde_json::from_str(&err[err.find('{').unwrap()..]).unwrap();
    assert_eq!(payload["suggested_window"], json!({ "levels": 200 }));
}

#[test]
fn csv_outputs_carry_provenance_line() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), &sinai_config(Some(0.75), 3));
    let out = tmp.path().join("o");
    assert_eq!(code(&run("analyze", &c, &out, &["--format", "csv"])), 0);
    let text = fs::read_to_string(out.join("series.csv")).unwrap();
    let first = text.lines().next().unwrap();
    let prov: Value = serde_json::from_str(first.strip_prefix("# provenance ").unwrap()).unwrap();
    assert_eq!(prov["command"], json!("analyze"));
    assert_eq!(prov["seeds"]["environment"], json!(3));
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(prov["config_sha256"], manifest["config_sha256"]);
}

#[test]
fn rerun_from_embedded_provenance_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(Some(0.25), 0);
    cfg["analysis"]["window"] = json!({ "levels": 100000 });
    cfg["simulation"] = json!({ "walks": 4, "steps": 20000, "base_seed": 11, "record_trace": true });
    cfg["sweep"] = json!({ "alpha_grid": [0.25, 0.75], "env_seeds": [0, 1] });
    let c = write_config(tmp.path(), &cfg);
    let first = tmp.path().join("first");
    for cmd in ["gen-env", "analyze", "simulate", "sweep"] {
        let o = run(cmd, &c, &first, &[]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // config recovered from a CSV's provenance line, not from config.json
    let line = fs::read_to_string(first.join("phase_table.csv")).unwrap().lines().next().unwrap().to_string();
    let prov: Value = serde_json::from_str(line.strip_prefix("# provenance ").unwrap()).unwrap();
    let recovered = tmp.path().join("recovered.json");
    fs::write(&recovered, serde_json::to_string(&prov["config"]).unwrap()).unwrap();
    let second = tmp.path().join("second");
    for cmd in ["gen-env", "analyze", "simulate", "sweep"] {
        assert_eq!(code(&run(cmd, &recovered, &second, &["--threads", "1"])), 0);
    }
    assert_eq!(snapshot(&first), snapshot(&second));
    assert_eq!(fs::read(first.join("manifest.json")).unwrap(), fs::read(second.join("manifest.json")).unwrap());
}

#[test]
fn simulate_is_thread_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(Some(0.75), 0);
    cfg["simulation"] = json!({ "walks": 12, "steps": 30000, "base_seed": 3 });
    let c = write_config(tmp.path(), &cfg);
    let a = tmp.path().join("t1");
    let b = tmp.path().join("t4");
    assert_eq!(code(&run("simulate", &c, &a, &["--threads", "1"])), 0);
    let o = bin()
        .args(["simulate", "--config"])
        .arg(&c)
        .arg("--out")
        .arg(&b)
        .env("STRATA_WALK_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(snapshot(&a), snapshot(&b));
}

#[test]
fn simulate_single_walk_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = flat_config();
    cfg["simulation"] = json!({ "walks": 1, "steps": 1000, "base_seed": 0, "record_trace": true });
    let c = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("o");
    assert_eq!(code(&run("simulate", &c, &out, &[])), 0);
    let e = read_json(&out.join("ensemble.json"));
    assert_eq!(e["walks"].as_array().unwrap().len(), 1);
    assert_eq!(e["walks"][0]["steps"], json!(1000));
    assert!(out.join("excursions.json").exists());
    let mut r = strata_walk_cli::output::csv_reader(&out.join("ensemble.csv")).unwrap();
    assert_eq!(r.records().count(), 1);
}

#[test]
fn simulate_without_section_is_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), &flat_config());
    assert_eq!(code(&run("simulate", &c, &tmp.path().join("o"), &[])), 2);
}

#[test]
fn sweep_single_alpha_matches_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(None, 0);
    cfg["analysis"]["window"] = json!({ "levels": 100000 });
    cfg["sweep"] = json!({ "alpha_grid": [0.25], "env_seeds": [0, 1, 2] });
    let c = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("sweep");
    assert_eq!(code(&run("sweep", &c, &out, &["--format", "json"])), 0);
    let table = read_json(&out.join("phase_table.json"));
    for (i, seed) in [0u64, 1, 2].into_iter().enumerate() {
        let single = write_config(&tmp.path().join("."), &{
            let mut s = sinai_config(Some(0.25), seed);
            s["analysis"]["window"] = json!({ "levels": 100000 });
            s
        });
        let o = tmp.path().join(format!("a{seed}"));
        assert_eq!(code(&run("analyze", &single, &o, &["--format", "json"])), 0);
        let cell = &table["cells"][i];
        assert_eq!(cell["env_seed"], json!(seed));
        assert_eq!(cell["verdict"], read_json(&o.join("verdict.json"))["label"]);
    }
    let summary = read_json(&out.join("sweep_summary.json"));
    assert_eq!(summary["alphas"][0]["cells"], json!(3));
}

#[test]
fn sweep_empty_seeds_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(None, 0);
    cfg["sweep"] = json!({ "alpha_grid": [0.25], "env_seeds": [] });
    let c = write_config(tmp.path(), &cfg);
    assert_eq!(code(&run("sweep", &c, &tmp.path().join("o"), &[])), 2);
}

#[test]
fn unknown_config_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = flat_config();
    cfg["analysis"]["treshold"] = json!({});
    let c = write_config(tmp.path(), &cfg);
    assert_eq!(code(&run("analyze", &c, &tmp.path().join("o"), &[])), 2);
}

#[test]
fn missing_config_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run("analyze", &tmp.path().join("none.json"), &tmp.path().join("o"), &[])), 4);
}

#[test]
fn seed_override_changes_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sinai_config(None, 0);
    cfg["analysis"]["window"] = json!({ "n_minus": 20, "n_plus": 20 });
    let c = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("o");
    assert_eq!(code(&run("gen-env", &c, &out, &["--seed-override", "9"])), 0);
    assert_eq!(read_json(&out.join("environment.json"))["environment"]["seed"], json!(9));
    // a different config into the same directory is refused
    assert_eq!(code(&run("gen-env", &c, &out, &[])), 2);
}

#[test]
fn report_verifies_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = flat_config();
    cfg["analysis"]["window"] = json!({ "n_minus": 50, "n_plus": 50 });
    let c = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("o");
    assert_eq!(code(&run("gen-env", &c, &out, &[])), 0);
    let o = bin().args(["report", "--format", "json", "--out"]).arg(&out).output().unwrap();
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["summary"]["validation_passed"], json!(true));
    assert_eq!(rep["verification"]["mismatched"], json!([]));

    fs::write(out.join("window.csv"), "tampered").unwrap();
    let o = bin().args(["report", "--out"]).arg(&out).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("MODIFIED  window.csv"));
    fs::remove_file(out.join("window.csv")).unwrap();
    assert_eq!(code(&bin().args(["report", "--out"]).arg(&out).output().unwrap()), 4);
}

#[test]
fn zero_threads_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_config(tmp.path(), &flat_config());
    assert_eq!(code(&run("gen-env", &c, &tmp.path().join("o"), &["--threads", "0"])), 2);
}
