use std::path::Path;
use std::process::{Command, Output};

use rotmcf::acceptance::compare_dirs;
use serde_json::Value;

fn rotmcf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotmcf"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("ROTMCF_N")
        .output()
        .unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn rows(p: &Path) -> Vec<String> {
    std::fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}

#[test]
fn find_c1_reports_the_root_and_lists_files_in_the_manifest() {
    let d = tempfile::tempdir().unwrap();
    let o = rotmcf(d.path(), &["catenoid", "--find-c1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c1 = read_json(&d.path().join("catenoid/c1.json"));
    assert!((c1["Y_C1"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let m = read_json(&d.path().join("catenoid/manifest.json"));
    for f in ["c1.json", "c1_search.csv", "catenoid_profile.csv", "catenoid_barrier.csv", "catenoid.gp"] {
        assert_eq!(m["files"][f]["sha256"].as_str().map(str::len), Some(64), "{f}");
    }
    assert_eq!(m["command"], "catenoid");
    assert!(m["config"].get("output_dir").is_none());
}

#[test]
fn scan_has_one_row_per_point() {
    let d = tempfile::tempdir().unwrap();
    let o = rotmcf(d.path(), &["catenoid", "--scan", "0.1:1.4:50"]);
    assert!(o.status.success());
    let r = rows(&d.path().join("catenoid/catenoid_scan.csv"));
    assert_eq!(r[0], "c,y_c,decreasing");
    assert_eq!(r.len(), 51);
    assert!(!d.path().join("catenoid/c1.json").exists());
}

#[test]
fn angenent_curve_closes_and_is_embedded() {
    let d = tempfile::tempdir().unwrap();
    let o = rotmcf(d.path(), &["angenent", "--lambda", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_json(&d.path().join("angenent/angenent.json"));
    assert!(a["closure_defect"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(a["embedded"], true);
    assert_eq!(a["self_similarity"]["passes"], true);
    assert_eq!(rows(&d.path().join("angenent/angenent_curve.csv"))[0], "axial,radial");
}

#[test]
fn constant_data_follows_the_closed_form() {
    let d = tempfile::tempdir().unwrap();
    let o = rotmcf(d.path(), &["flow", "--initial", "constant:1.0", "--flow-nodes", "64", "--horizon", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_json(&d.path().join("flow/flow.json"));
    assert!(f["details"]["homogeneous_oracle_error"].as_f64().unwrap() < 1e-4);
    assert_eq!(f["outcome"]["kind"], "Pinched");
    let r = rows(&d.path().join("flow/flow_trace.csv"));
    assert_eq!(r[0], "t,head,height,max_slope_vertical,max_slope_horizontal");
}

#[test]
fn minimal_sphere_survives_unchanged() {
    let d = tempfile::tempdir().unwrap();
    let o = rotmcf(d.path(), &["flow", "--initial", "sphere", "--flow-nodes", "64", "--horizon", "0.5"]);
    assert!(o.status.success());
    let f = read_json(&d.path().join("flow/flow.json"));
    assert_eq!(f["outcome"]["kind"], "Survived");
    assert_eq!(f["final_height"].as_f64(), Some(0.0));
}

#[test]
fn flow_outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = rotmcf(d.path(), &["flow", "--initial", "ellipse:0.3:0.2", "--flow-nodes", "48", "--horizon", "0.1"]);
        assert!(o.status.success());
    }
    assert_eq!(compare_dirs(&a.path().join("flow"), &b.path().join("flow")).unwrap(), Vec::<String>::new());
}

#[test]
fn config_file_environment_and_flags_layer_in_order() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("run.cfg");
    std::fs::write(&file, "# test\nn = 3\nt_max = 7\nseed = 5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rotmcf"))
        .args(["config", "--config"])
        .arg(&file)
        .args(["--seed", "9", "--set", "cfl=0.2"])
        .env("ROTMCF_T_MAX", "8")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in ["n = 3", "t_max = 8", "seed = 9", "cfl = 0.2"] {
        assert!(text.lines().any(|l| l == line), "{line} missing from\n{text}");
    }
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| rotmcf(d.path(), args).status.code();
    // Configuration and file problems.
    assert_eq!(code(&["config", "--set", "bogus=1"]), Some(1));
    assert_eq!(code(&["config", "--cfl=-1"]), Some(1));
    assert_eq!(code(&["config", "--config", "/nonexistent/run.cfg"]), Some(1));
    assert_eq!(code(&["flow", "--initial", "circle:1"]), Some(1));
    assert_eq!(code(&["nonsense"]), Some(1));
    // A failed search.
    assert_eq!(code(&["angenent", "--lambda=-1"]), Some(2));
    assert_eq!(code(&["config"]), Some(0));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = rotmcf(&blocker, &["catenoid", "--find-c1"]);
    assert_eq!(o.status.code(), Some(1));
}
