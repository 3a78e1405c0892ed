use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coopdipole"));
    cmd.env_remove("COOPDIPOLE_THREADS").env("RUST_LOG", "warn");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path.as_ref()).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn small(task: Value) -> Value {
    serde_json::json!({
        "geometry": {"array": {"builder": "stripe", "nx": 4, "ny": 4}, "lattice_constant": 0.3},
        "species": {"delta_a": 0.5, "delta_b": -0.5},
        "task": task
    })
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", &small(serde_json::json!({"kind": "transmit"})));
    let o = run_in(dir.path(), &["validate", "c.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lens"]["z"], 150.0);
    assert_eq!(v["lens"]["radius"], 90.0);
    assert_eq!(v["solver"]["method"], "dense");
}

#[test]
fn typo_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(serde_json::json!({"kind": "transmit"}));
    c["species"] = serde_json::json!({"detunning": 0.5});
    write(dir.path(), "c.json", &c);
    for sub in ["validate", "run"] {
        let o = run_in(dir.path(), &[sub, "c.json"]);
        assert_eq!(code(&o), 2);
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("detunning") && err.contains("/species"), "{err}");
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(dir.path(), &["run", "nope.json"])), 4);
}

#[test]
fn solver_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(serde_json::json!({"kind": "solve"}));
    c["solver"] = serde_json::json!({"method": "iterative", "tolerance": 1e-14, "max_iterations": 1, "restart": 1});
    write(dir.path(), "c.json", &c);
    let o = run_in(dir.path(), &["run", "c.json"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver"));
}

#[test]
fn fig4_transmission() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["presets", "copy", "fig4"]);
    assert_eq!(code(&o), 0);
    let mut c = read_json(dir.path().join("fig4.json"));
    c["task"] = serde_json::json!({"kind": "transmit"});
    write(dir.path(), "fig4.json", &c);
    let o = run_in(dir.path(), &["run", "fig4.json", "--out", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_json(dir.path().join("out/transmission.json"));
    let (tx, ty) = (t["t_x"].as_f64().unwrap(), t["t_y"].as_f64().unwrap());
    assert!((tx - 0.5).abs() < 0.05 && ty < 0.05, "T_x = {tx}, T_y = {ty}");
    let m = read_json(dir.path().join("out/manifest.json"));
    assert_eq!(m["task"], "transmit");
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
    for want in ["resolved_config.json", "atoms.csv", "local_fields.csv", "solution.json", "transmission.json"] {
        assert!(names.contains(&want), "{names:?}");
    }
}

/// Artifact bytes of a run directory. Wall-clock fields are blanked and the
/// manifest, which is mostly timings and hashes, is left out.
fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let mut bytes = fs::read(e.path()).unwrap();
            if name == "solution.json" {
                let mut v: Value = serde_json::from_slice(&bytes).unwrap();
                v["wall_time_seconds"] = Value::Null;
                bytes = serde_json::to_vec(&v).unwrap();
            }
            (name, bytes)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn resolved_config_reproduces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let task = serde_json::json!({
        "kind": "fieldmap",
        "planes": [{"z": 3.0, "x_range": [-1.0, 1.0], "y_range": [-1.0, 1.0], "nx": 5, "ny": 4}]
    });
    write(dir.path(), "c.json", &small(task));
    assert_eq!(code(&run_in(dir.path(), &["run", "c.json", "--out", "first"])), 0);
    let resolved = dir.path().join("first/resolved_config.json");
    assert_eq!(code(&run_in(dir.path(), &["run", resolved.to_str().unwrap(), "--out", "first"])), 0);
    let again = artifact_bytes(&dir.path().join("first"));

    // A fresh directory differs only in the recorded output path.
    assert_eq!(code(&run_in(dir.path(), &["run", resolved.to_str().unwrap(), "--out", "second"])), 0);
    let second = artifact_bytes(&dir.path().join("second"));
    assert_eq!(again.len(), second.len());
    for ((n1, b1), (n2, b2)) in again.iter().zip(&second) {
        assert_eq!(n1, n2);
        if n1 != "resolved_config.json" {
            assert!(b1 == b2, "{n1} differs");
        }
    }
    let names: Vec<&str> = second.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"field_z3.csv") && names.contains(&"field_z3.json") && names.contains(&"transmission.json"));
    let header = fs::read_to_string(dir.path().join("second/field_z3.csv")).unwrap();
    assert!(header.lines().next().unwrap().ends_with("S0,S1,S2,S3,psi,chi"));
    assert_eq!(header.lines().count(), 1 + 20);
}

#[test]
fn manifest_hash_tracks_input_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(serde_json::json!({"kind": "solve"}));
    let path = write(dir.path(), "c.json", &c);
    assert_eq!(code(&run_in(dir.path(), &["run", "c.json", "--out", "a"])), 0);
    assert_eq!(code(&run_in(dir.path(), &["run", "c.json", "--out", "b"])), 0);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push('\n');
    fs::write(&path, text).unwrap();
    assert_eq!(code(&run_in(dir.path(), &["run", "c.json", "--out", "c"])), 0);
    let hash = |d: &str| read_json(dir.path().join(d).join("manifest.json"))["inputs"][0]["sha256"].clone();
    assert_eq!(hash("a"), hash("b"));
    assert_ne!(hash("a"), hash("c"));
}

#[test]
fn thread_count_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(serde_json::json!({"kind": "solve"}));
    write(dir.path(), "plain.json", &c);
    c["solver"] = serde_json::json!({"threads": 2});
    write(dir.path(), "pinned.json", &c);
    let threads = |cfg: &str, flag: Option<&str>, env: Option<&str>| {
        let out = format!("out-{cfg}-{flag:?}-{env:?}");
        let mut cmd = bin();
        cmd.current_dir(dir.path()).args(["run", cfg, "--out", &out]);
        if let Some(f) = flag {
            cmd.args(["--threads", f]);
        }
        if let Some(e) = env {
            cmd.env("COOPDIPOLE_THREADS", e);
        }
        assert!(cmd.output().unwrap().status.success());
        read_json(dir.path().join(out).join("manifest.json"))["threads"].as_u64().unwrap()
    };
    assert_eq!(threads("pinned.json", Some("3"), Some("4")), 3);
    assert_eq!(threads("pinned.json", None, Some("4")), 2);
    assert_eq!(threads("plain.json", None, Some("4")), 4);
}

#[test]
fn sweep_series_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let task = serde_json::json!({
        "kind": "sweep",
        "axis": {"variable": "a", "start": 0.2, "stop": 0.24, "step": 0.02},
        "series": [{"rule": "symmetric", "delta": 0.5}, {"rule": "fixed", "delta_a": 1.0, "delta_b": -1e6}]
    });
    write(dir.path(), "c.json", &small(task));
    assert_eq!(code(&run_in(dir.path(), &["run", "c.json", "--out", "o"])), 0);
    for f in ["sweep_0.csv", "sweep_1.csv"] {
        let text = fs::read_to_string(dir.path().join("o").join(f)).unwrap();
        assert!(text.starts_with("axis,T,T_x,T_y,residual,iterations,seconds,status\n"));
        assert_eq!(text.lines().count(), 4, "{text}");
    }
    let series = read_json(dir.path().join("o/series.json"));
    assert_eq!(series[1]["rule"]["delta_b"], -1e6);
}

#[test]
fn zeros_and_lattice_sums() {
    let dir = tempfile::tempdir().unwrap();
    let task = serde_json::json!({
        "kind": "zeros",
        "axis": {"variable": "a", "start": 0.2, "stop": 0.23, "step": 0.01},
        "component": "y",
        "deltas": [0.5, 0.6],
        "options": {"threshold": 2.0}
    });
    write(dir.path(), "z.json", &small(task));
    assert_eq!(code(&run_in(dir.path(), &["run", "z.json", "--out", "z"])), 0);
    let zeros = fs::read_to_string(dir.path().join("z/zeros.csv")).unwrap();
    assert!(zeros.starts_with("delta,branch,a_star,T_min\n"));
    assert!(dir.path().join("z/fit.json").exists());

    let lattice = serde_json::json!({
        "task": {"kind": "latticesum", "axis": {"variable": "a", "values": [0.27, 0.3]}, "truncation": 40,
                 "crossing": {"bracket": [0.2, 0.35]}}
    });
    write(dir.path(), "l.json", &lattice);
    let o = run_in(dir.path(), &["run", "l.json", "--out", "l"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("l/lattice_sum.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let crossing = read_json(dir.path().join("l/crossing.json"));
    assert!((crossing["a_star"].as_f64().unwrap() - 0.27).abs() < 0.03);
}

#[test]
fn pixels_demo_reports_each_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let px = |o: &str| serde_json::json!({"side": 4, "orientation": o});
    let c = serde_json::json!({
        "geometry": {"array": {"builder": "pixels",
            "layout": {"pixels": [[px("x"), px("y")], [px("y"), px("x")]], "isolation": 1}},
            "lattice_constant": 0.4},
        "species": {"delta_a": 0.5, "delta_b": -0.5},
        "solver": {"method": "iterative", "tolerance": 1e-8, "operator": "lattice"},
        "task": {"kind": "pixels-demo", "window": 1.0,
                 "planes": [{"z": 2.0, "x_range": [-2.0, 2.0], "y_range": [-2.0, 2.0], "nx": 3, "ny": 3}]}
    });
    write(dir.path(), "p.json", &c);
    let o = run_in(dir.path(), &["run", "p.json", "--out", "p"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(dir.path().join("p/pixels.json"));
    assert_eq!(report.as_array().unwrap().len(), 4);
    assert!(report[0]["psi_degrees"].is_number());
    let atoms = fs::read_to_string(dir.path().join("p/atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 1 + 81);
}

#[test]
fn csv_geometry_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", &small(serde_json::json!({"kind": "transmit"})));
    assert_eq!(code(&run_in(dir.path(), &["run", "c.json", "--out", "a"])), 0);
    let sub = dir.path().join("configs");
    fs::create_dir(&sub).unwrap();
    fs::copy(dir.path().join("a/atoms.csv"), sub.join("atoms.csv")).unwrap();
    let mut c = small(serde_json::json!({"kind": "transmit"}));
    c["geometry"] = serde_json::json!({"csv": "atoms.csv"});
    write(&sub, "c.json", &c);
    // Run from the parent directory: the CSV path is relative to the config.
    let o = run_in(dir.path(), &["run", "configs/c.json", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = |d: &str| read_json(dir.path().join(d).join("transmission.json"))["t"].as_f64().unwrap();
    assert!((t("a") - t("b")).abs() < 1e-12);
    let m = read_json(dir.path().join("b/manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn presets_list_and_copy() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["presets", "list"]);
    assert_eq!(code(&o), 0);
    let listing = String::from_utf8_lossy(&o.stdout);
    for name in ["fig2a", "fig3d", "fig4", "fig5", "figS1a", "figS2c"] {
        assert!(listing.contains(name), "{listing}");
    }
    assert_eq!(code(&run_in(dir.path(), &["presets", "copy", "fig5"])), 0);
    assert_eq!(code(&run_in(dir.path(), &["presets", "copy", "fig5"])), 4);
    assert_eq!(code(&run_in(dir.path(), &["presets", "copy", "fig5", "--force"])), 0);
    assert_eq!(code(&run_in(dir.path(), &["presets", "copy", "fig9"])), 2);
    assert_eq!(code(&run_in(dir.path(), &["validate", "fig5.json"])), 0);
}
