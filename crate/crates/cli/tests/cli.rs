use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rodflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rodflow"))
        .args(args)
        .env_remove("RODFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    rodflow(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_data_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.toml",
        "N = 32\ndt = 0.25\nformulation = \"eulerian\"\n[initial_data]\nkind = \"zero\"\n",
    );
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 1 + 5 + 1);
    for f in outputs {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
    let snap = fs::read_to_string(out.join("eulerian_00004.csv")).unwrap();
    for line in snap.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn both_formulations_write_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "both.json",
        r#"{"gamma": 2.0, "N": 64, "dt": 0.01, "formulation": "both", "snapshot_stride": 25,
            "initial_data": {"kind": "sine", "amplitude": 0.1}}"#,
    );
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("cross_check.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,sup_diff"));
    let diffs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(diffs.len(), 5);
    assert!(diffs.iter().all(|&d| d < 1e-6));
}

#[test]
fn overrides_and_threads_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "N = 32\ndt = 0.1\nformulation = \"lagrangian\"\n");
    let out = dir.path().join("out");
    let o = rodflow(&[
        "--threads",
        "1",
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--snapshot-stride",
        "5",
        "--dealias",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config_echo"]["snapshot_stride"], 5);
    assert_eq!(m["config_echo"]["dealias"], true);
    assert!(out.join("lagrangian_00002.csv").exists());
    assert!(!out.join("lagrangian_00003.csv").exists());
}

#[test]
fn malformed_config_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "gamma = 2.0\nN = 64\ngama = 1.0\n");
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("gama") && err.contains("line 3"), "{err}");
    assert!(!out.exists());

    let cfg = write(dir.path(), "gamma0.toml", "gamma = 0.0\n");
    assert_eq!(run("simulate", &cfg, &out).status.code(), Some(1));
    let o = run("simulate", &dir.path().join("missing.toml"), &out);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eulerian_blow_up_exits_two_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "blow.toml",
        "gamma = 1.0\nN = 64\ndt = 0.01\nT = 5.0\nnorm_cap = 3.0\nformulation = \"eulerian\"\n\
         snapshot_stride = 50\n[initial_data]\nkind = \"sine\"\namplitude = 1.0\n",
    );
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["status"], "early_termination");
    assert_eq!(m["completed"], false);
    let traj: Value = serde_json::from_str(&fs::read_to_string(out.join("eulerian.json")).unwrap()).unwrap();
    assert_eq!(traj["completed"], false);
    assert!(traj["termination"]["time"].as_f64().unwrap() < 5.0);
    for f in m["outputs"].as_array().unwrap() {
        let text = fs::read_to_string(out.join(f.as_str().unwrap())).unwrap();
        assert!(!text.contains("NaN") && !text.contains("inf"));
    }
}

#[test]
fn conservation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.toml", "gamma = 1.0\nN = 64\ndt = 0.05\n");
    let out = dir.path().join("ok");
    let o = run("verify-conservation", &ok, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("conservation.json")).unwrap()).unwrap();
    assert_eq!(summary["psi_identically_zero"], true);

    let zero = write(dir.path(), "zero.toml", "gamma = 2.0\nN = 64\ndt = 0.1\ntolerance = 0.0\n[initial_data]\nkind = \"zero\"\n");
    let out = dir.path().join("zero");
    assert_eq!(run("verify-conservation", &zero, &out).status.code(), Some(0));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("conservation.json")).unwrap()).unwrap();
    assert_eq!(summary["max_residual_sup"], 0.0);

    let strict = write(dir.path(), "strict.toml", "gamma = 2.0\nN = 64\ndt = 0.1\ntolerance = 0.0\n");
    let out = dir.path().join("strict");
    let o = run("verify-conservation", &strict, &out);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(manifest(&out)["status"], "verification_failed");
}

#[test]
fn conservation_sweep_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/conservation.json");
    let out = dir.path().join("out");
    let o = run("verify-conservation", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("conservation.json")).unwrap()).unwrap();
    let orders = summary["observed_orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|p| p.as_f64().unwrap() >= 3.5), "{orders:?}");
}

#[test]
fn nonuniform_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let zero_g = write(
        dir.path(),
        "zg.toml",
        "gamma = 2.0\nN = 512\ndt = 0.02\n[experiment]\ng = { kind = \"zero\" }\nx0 = 1.5\nR = 0.2\n",
    );
    assert_eq!(run("nonuniform", &zero_g, &out).status.code(), Some(1));

    let coarse = write(
        dir.path(),
        "coarse.toml",
        "gamma = 2.0\nN = 512\ndt = 0.02\n[experiment]\ng = { kind = \"sine\", amplitude = 0.2 }\nx0 = 1.5707963267948966\nR = 0.2\n",
    );
    let o = run("nonuniform", &coarse, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("N = 38512"), "{}", stderr(&o));

    let degenerate = write(
        dir.path(),
        "deg.toml",
        "gamma = 2.0\nN = 512\ndt = 0.02\n[experiment]\ng = { kind = \"sine\", amplitude = 0.2 }\nx0 = 3.141592653589793\nR = 0.2\nn_values = [1]\n",
    );
    let o = run("nonuniform", &degenerate, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("perturb x0"), "{}", stderr(&o));
}

#[test]
fn nonuniform_small_sweep_flags_short_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        "gamma = 2.0\nN = 2048\ndt = 0.02\n[experiment]\ng = { kind = \"sine\", amplitude = 1.0 }\nx0 = 1.5707963267948966\nR = 0.2\nn_values = [1, 2]\n",
    );
    let out = dir.path().join("out");
    let o = run("nonuniform", &cfg, &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("non_uniformity_witness"));
    let csv = fs::read_to_string(out.join("experiment.csv")).unwrap();
    assert!(csv.starts_with("n,r_n,initial_gap,final_gap_s,final_gap_y_s2,phi_separation,supports_disjoint,status\n"));
    assert_eq!(csv.lines().count(), 3);
}
