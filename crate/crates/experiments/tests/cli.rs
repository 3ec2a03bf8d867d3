use std::fs;
use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"{
  "model": {"a0": 0.3, "M": 2, "measure": {"type": "gl", "n": 3}},
  "space": {"n_per_side": 5},
  "dlr": {"R": 2},
  "scheme": {"name": "semi_implicit", "dt": 1.0},
  "run": {"max_steps": 500, "stop_energy": 1e-10, "blowup_energy": 1e4}
}"#;

fn scratch_dir(name: &str) -> std::path::PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn dlr_heat(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dlr-heat")).args(args).output().unwrap()
}

#[test]
fn decay_writes_identical_traces_on_rerun() {
    let dir = scratch_dir("cli_decay");
    let cfg = dir.join("small.json");
    fs::write(&cfg, SMALL).unwrap();
    let mut traces = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let status = dlr_heat(&["decay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        assert!(out.join("report.json").exists());
        traces.push(fs::read_to_string(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert!(traces[0].starts_with("step,time,energy_norm"));
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = scratch_dir("cli_bad");
    let missing = dir.join("missing.json");
    let out = dlr_heat(&["decay", "--config", missing.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.join("bad.json");
    fs::write(&bad, SMALL.replace("\"dt\": 1.0", "\"dt\": -1.0")).unwrap();
    let out = dlr_heat(&["decay", "--config", bad.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme.dt"));
}
