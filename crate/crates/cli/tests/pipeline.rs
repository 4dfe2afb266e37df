use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn vmspod(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmspod"))
        .current_dir(dir)
        .env_remove("VMSPOD_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) {
    fs::write(dir.join("cfg.json"), body).unwrap();
}

const BASE: &str = r#"{ "problem": "forced_cavity", "mesh": {"nx": 8, "ny": 8}, "nu": 0.01, "dt": 0.02,
  "t_end": 1.0, "scheme": "bdf2", "r": 6, "R": 2, "nu_t": 0.005, "out": "run" }"#;

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let o = vmspod(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    o
}

fn pipeline(dir: &Path) {
    for cmd in ["dns", "pod", "rom", "audit"] {
        run_ok(dir, &[cmd, "--config", "cfg.json"]);
    }
}

#[test]
fn eight_by_eight_pipeline_completes_within_a_minute() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    let start = Instant::now();
    pipeline(dir.path());
    assert!(start.elapsed() < Duration::from_secs(60));
    let out = dir.path().join("run");
    for f in [
        "snapshots.vps",
        "dns_trajectory.csv",
        "dns_manifest.json",
        "basis.vpb",
        "eigenvalues.csv",
        "pod_manifest.json",
        "rom_trajectory.csv",
        "audit.txt",
        "audit.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let traj = fs::read_to_string(out.join("rom_trajectory.csv")).unwrap();
    assert!(traj.contains("# config_hash="));
    assert!(traj.contains("# space_fingerprint="));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("pod_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["r"], 6);
    assert!(fs::read_to_string(out.join("audit.txt")).unwrap().contains("verdict: PASS"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    pipeline(dir.path());
    let out = dir.path().join("run");
    let first: Vec<Vec<u8>> = ["rom_trajectory.csv", "eigenvalues.csv", "dns_trajectory.csv", "basis.vpb"]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    pipeline(dir.path());
    for (f, before) in ["rom_trajectory.csv", "eigenvalues.csv", "dns_trajectory.csv", "basis.vpb"].iter().zip(first) {
        assert_eq!(fs::read(out.join(f)).unwrap(), before, "{f} changed between runs");
    }
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    for args in [
        vec!["rom", "--config", "cfg.json", "--R", "7"],
        vec!["rom", "--config", "cfg.json", "--nu-t", "-1"],
        vec!["dns", "--config", "cfg.json", "--dt", "0.3"],
        vec!["dns", "--config", "missing.json"],
        vec!["dns", "--config", "cfg.json", "--scheme", "rk4"],
    ] {
        let o = vmspod(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = vmspod(dir.path(), &["rom", "--config", "cfg.json", "--R", "7"]);
    assert!(stderr(&o).contains("R=7 exceeds r=6"));
}

#[test]
fn mismatched_mesh_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    run_ok(dir.path(), &["dns", "--config", "cfg.json"]);
    write_config(dir.path(), &BASE.replace(r#""nx": 8, "ny": 8"#, r#""nx": 6, "ny": 6"#));
    let o = vmspod(dir.path(), &["pod", "--config", "cfg.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("fingerprint"));
}

#[test]
fn bdf2_above_stability_threshold_warns() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    run_ok(dir.path(), &["dns", "--config", "cfg.json"]);
    run_ok(dir.path(), &["pod", "--config", "cfg.json"]);
    let o = run_ok(dir.path(), &["rom", "--config", "cfg.json", "--nu-t", "0.05"]);
    assert!(stderr(&o).contains("nu_T < 4 nu"));
    let traj = fs::read_to_string(dir.path().join("run/rom_trajectory.csv")).unwrap();
    assert!(traj.contains("# warning="));
    let o = run_ok(dir.path(), &["rom", "--config", "cfg.json", "--nu-t", "0.05", "--scheme", "backward_euler"]);
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn audit_of_tampered_trajectory_fails_numerically() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &BASE.replace("bdf2", "backward_euler"));
    pipeline(dir.path());
    let path = dir.path().join("run/rom_trajectory.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.iter().position(|l| l.starts_with("10,")).unwrap();
    let mut fields: Vec<String> = lines[row].split(',').map(String::from).collect();
    let last = fields.len() - 1;
    fields[last] = "1.0".into();
    lines[row] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = vmspod(dir.path(), &["audit", "--config", "cfg.json"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(fs::read_to_string(dir.path().join("run/audit.txt")).unwrap().contains("FAIL"));
}

#[test]
fn audit_rejects_parameter_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    pipeline(dir.path());
    let o = vmspod(dir.path(), &["audit", "--config", "cfg.json", "--nu-t", "0.01"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn dt_study_writes_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        r#"{ "problem": "decaying_vortex", "mesh": {"nx": 4, "ny": 4}, "nu": 0.05, "dt": 0.1, "dns_dt": 0.025,
             "t_end": 0.5, "scheme": "backward_euler", "r": 6, "R": 2, "nu_t": 0.0, "out": "run",
             "study": {"kind": "dt", "dt_values": [0.1, 0.05]} }"#,
    );
    let o = run_ok(dir.path(), &["study", "--config", "cfg.json"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("linf_l2"));
    let table = fs::read_to_string(dir.path().join("run/study_dt.csv")).unwrap();
    assert!(table.contains("# config_hash="));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 3);
    run_ok(dir.path(), &["study", "--config", "cfg.json", "--kind", "R"]);
    assert!(dir.path().join("run/study_R.csv").exists());
}

#[test]
fn output_directory_overrides() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), BASE);
    let o = Command::new(env!("CARGO_BIN_EXE_vmspod"))
        .current_dir(dir.path())
        .env("VMSPOD_OUT", "from_env")
        .args(["dns", "--config", "cfg.json"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from_env/snapshots.vps").exists());
    run_ok(dir.path(), &["dns", "--config", "cfg.json", "--out", "from_flag"]);
    assert!(dir.path().join("from_flag/snapshots.vps").exists());
}
