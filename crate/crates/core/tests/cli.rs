use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn svw() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svw"))
}

fn write_config(dir: &Path, v: &Value) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn small() -> Value {
    json!({
        "grid": {"n": 64},
        "noise": {"pairs": 2, "amplitude": 0.2, "decay": 3.0, "seed": 1},
        "run": {"t_end": 0.1, "cfl": 0.5, "mode": "regularized", "epsilon": 0.1},
        "init": {"kind": "fourier", "u": [{"k": 1, "sin": 0.1}]},
        "output_stride": 4
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small());
    let out = dir.path().join("out");
    let status = svw().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    for name in ["timeseries.csv", "summary.json", "meta.json", "report.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["seed"], 1);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains(meta["config_hash"].as_str().unwrap()));
}

#[test]
fn seed_flag_changes_the_path_and_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small());
    let mut hashes = Vec::new();
    let mut csvs = Vec::new();
    for (name, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = dir.path().join(name);
        let status =
            svw().args(["run", "--seed", seed, "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        hashes.push(read_json(&out.join("meta.json"))["config_hash"].clone());
        csvs.push(fs::read(out.join("timeseries.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_ne!(csvs[0], csvs[2]);
    assert_eq!(hashes[0], hashes[1]);
    assert_ne!(hashes[0], hashes[2]);
}

#[test]
fn ensemble_respects_paths_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small());
    let out = dir.path().join("ens");
    let status = svw()
        .args(["ensemble", "--paths", "3", "--workers", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["paths"], 3);
    assert_eq!(summary["records"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.starts_with("2,")));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut typo = small();
    typo["run"]["epsilom"] = 0.1.into();
    let mut cfl = small();
    cfl["run"]["cfl"] = 0.9.into();
    for (i, v) in [typo, cfl].iter().enumerate() {
        let p = dir.path().join(format!("bad{i}.json"));
        fs::write(&p, v.to_string()).unwrap();
        let out = dir.path().join(format!("out{i}"));
        let status = svw().args(["run", "--config"]).arg(&p).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(2));
        assert!(!out.exists(), "no output for an invalid config");
    }
    let status = svw().args(["run", "--config", "/nonexistent/config.json", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));
    // Blow-up parameters outside their admissible range.
    let cfg = write_config(dir.path(), &small());
    let status = svw()
        .args(["blowup", "--nu", "0.6", "--paths", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("b"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn presets_emit_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small();
    v["grid"]["n"] = 128.into();
    v["run"]["mode"] = "regular".into();
    let cfg = write_config(dir.path(), &v);
    let out = dir.path().join("blow");
    let status = svw()
        .args(["blowup", "--eps", "0.2", "--paths", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let table = read_json(&out.join("blowup.json"));
    let row = &table["rows"][0];
    assert_eq!(row["paths"], 4);
    assert!(out.join("blowup.csv").exists() && out.join("report.txt").exists());

    let mut v = small();
    v["run"]["t_end"] = 0.05.into();
    let cfg = write_config(dir.path(), &v);
    let out = dir.path().join("conv");
    let status = svw()
        .args(["converge", "--eps", "0.2,0.1", "--paths", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let table = read_json(&out.join("convergence.json"));
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
    // The reference compared with itself.
    assert_eq!(table["rows"][1]["l2_to_reference"]["max"], 0.0);
}
