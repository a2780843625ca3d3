use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn learnctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_learnctl")).args(args).output().expect("binary runs")
}

fn short_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("short.toml");
    let text = format!(
        "seed = 3\noracle = \"truth\"\n[sim]\nt_end = 1.0\n[learning]\nupdate_stop_time = 1.0\n[bound]\nprobe_samples = 200\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn printed_defaults_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = learnctl(&["validate-config", "--print-defaults"]);
    assert!(out.status.success());
    let path = dir.path().join("defaults.toml");
    fs::write(&path, &out.stdout).unwrap();
    let check = learnctl(&["validate-config", "--config", path.to_str().unwrap()]);
    assert!(check.status.success(), "{}", stderr(&check));
    assert!(String::from_utf8_lossy(&check.stdout).contains("14000 steps"));
}

#[test]
fn empty_file_means_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    fs::write(&path, "").unwrap();
    let out = learnctl(&["validate-config", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("24 switches, oracle gp"));
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[sim]\ndt = 0.0\n").unwrap();
    let out = learnctl(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sim.dt"));

    fs::write(&path, "[sim]\ntimestep = 0.01\n").unwrap();
    let out = learnctl(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = learnctl(&["simulate", "--oracle", "magic"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_with_code_3() {
    let out = learnctl(&["simulate", "--config", "/nonexistent/learnctl.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_artifacts_and_honors_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let out_dir = dir.path().join("run");
    let out = learnctl(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "11", "--quiet"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    for name in ["log.csv", "summary.json", "trajectory.dat", "data.dat", "VK.dat", "dataset.csv", "config.toml"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["oracle"], "truth");
    let log = fs::read_to_string(out_dir.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1002);
    assert!(log.starts_with("t,px,py,pz,pdx,pdy,pdz,z0_norm,V,gain_norm,u,taux,tauy,tauz,N,n,rho_bar,bound"));

    let again = dir.path().join("again");
    let out = learnctl(&["simulate", "--config", &cfg, "--out", again.to_str().unwrap(), "--seed", "11", "--quiet"]);
    assert!(out.status.success());
    assert_eq!(fs::read(out_dir.join("log.csv")).unwrap(), fs::read(again.join("log.csv")).unwrap());
}

#[test]
fn unwritable_output_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = learnctl(&["simulate", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_offsets_seeds_by_run_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "[output]\nwrite_plot_data = false\n");
    let out_dir = dir.path().join("sweep");
    let out = learnctl(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--runs",
        "3",
        "--jobs",
        "2",
        "--oracle",
        "zero",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["runs"], 3);
    let seeds: Vec<u64> = report["summaries"].as_array().unwrap().iter().map(|s| s["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![3, 4, 5]);
    assert!(out_dir.join("run_002").join("summary.json").is_file());
    assert!(!out_dir.join("run_000").join("trajectory.dat").exists());
}
