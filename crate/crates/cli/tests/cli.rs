use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qanneal-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qanneal"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn uniform_two_state_spectrum() {
    let dir = scratch("spectrum");
    let out = run(&["spectrum"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let mut phases: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    phases.sort_by(f64::total_cmp);
    let expected = [-PI / 2.0, 0.0, PI / 2.0, PI];
    assert_eq!(phases.len(), 4);
    for (p, e) in phases.iter().zip(expected) {
        assert!((p - e).abs() < 1e-9, "{phases:?}");
    }
}

#[test]
fn zero_epochs_reports_the_best_uniform_draw() {
    let dir = scratch("optimize");
    let config = write_config(&dir, "[instance]\nepochs = 0\nscale = 2.0\n");
    let out = run(&["optimize", "--config", &config, "--seed", "4"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.join("optimize.json"));
    let result = &report["result"];
    assert_eq!(result["epochs_completed"], 0);
    assert_eq!(result["epochs"].as_array().unwrap().len(), 0);
    let x: Vec<f64> = result["best_point"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let value = 2.0 * ((x[0] - 0.3).powi(2) + (x[1] - 0.2).powi(2));
    assert!((result["best_value"].as_f64().unwrap() - value).abs() < 1e-12);
    assert!(x[0] * x[0] + x[1] * x[1] <= 1.0);
}

#[test]
fn reports_embed_the_resolved_config_and_seed() {
    let dir = scratch("provenance");
    let config = write_config(&dir, "seed = 1\n[sample]\nsteps = 20\n");
    let out = run(&["sample", "--config", &config, "--seed", "9"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.join("sample.json"));
    assert_eq!(report["command"], "sample");
    assert_eq!(report["seed"], 9);
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["instance"]["seed"], 9);
    assert_eq!(report["config"]["sample"]["steps"], 20);
    let csv = std::fs::read_to_string(dir.join("sample-trajectories.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 21);
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let config_dir = scratch("determinism");
    let config = write_config(
        &config_dir,
        "seed = 11\n[bandit]\nhorizon = 40\n[instance]\nsteps = 30\n",
    );
    for command in ["optimize", "bandit", "sample"] {
        let (a, b) = (scratch(&format!("{command}-a")), scratch(&format!("{command}-b")));
        assert!(run(&[command, "--config", &config], &a).status.success());
        assert!(run(&[command, "--config", &config, "--threads", "2"], &b)
            .status
            .success());
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let left = std::fs::read(a.join(&name)).unwrap();
            let right = std::fs::read(b.join(&name)).unwrap();
            assert!(left == right, "{command}: {name:?} differs");
        }
    }
}

#[test]
fn bandit_writes_one_trace_per_estimator_and_seed() {
    let dir = scratch("bandit");
    let config = write_config(&dir, "[bandit]\nhorizon = 16\nseeds = 2\n");
    let out = run(&["bandit", "--config", &config, "--seed", "2"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["bandit-quantum-model-0.csv", "bandit-classical-1.csv"] {
        let csv = std::fs::read_to_string(dir.join(name)).unwrap();
        assert!(csv.starts_with("t,x1,x2,instant_regret,cum_regret,queries\n"));
        assert_eq!(csv.lines().count(), 17);
    }
    let report = json(&dir.join("bandit.json"));
    assert_eq!(report["result"].as_array().unwrap().len(), 4);
}

#[test]
fn validation_suites_pass_and_fail_with_their_codes() {
    let dir = scratch("validate");
    let out = run(&["validate-lemmas", "--seed", "3"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.join("validate.json"));
    assert_eq!(report["result"]["spectral"].as_array().unwrap().len(), 2);
    let config = write_config(&dir, "[validate]\ngap-constant = 0.0\ngap-band = 1000.0\n");
    let out = run(&["validate-lemmas", "--config", &config], &dir);
    assert_eq!(out.status.code(), Some(6));
    assert!(dir.join("validate.json").exists());
}

#[test]
fn amplify_meets_its_bounds() {
    let dir = scratch("amplify");
    let out = run(&["amplify"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json(&dir.join("amplify.json"))["result"];
    assert!(r["fidelity"].as_f64().unwrap() >= r["fidelity_bound"].as_f64().unwrap() - 1e-9);
    let reflector = &r["reflector"];
    assert!(
        (reflector["max_far_error"].as_f64().unwrap() - reflector["max_far_predicted"].as_f64().unwrap()).abs() < 1e-9
    );
}

#[test]
fn bad_inputs_exit_with_status_one() {
    let dir = scratch("errors");
    assert_eq!(run(&["optimize"], &dir).status.code(), Some(1));
    let config = write_config(&dir, "[spectrum]\nchain = \"file\"\npath = \"missing.txt\"\n");
    let out = run(&["spectrum", "--config", &config], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    let config = write_config(&dir, "[instance]\nn = 0\n");
    assert_eq!(
        run(&["optimize", "--config", &config, "--seed", "1"], &dir)
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn chain_files_resolve_next_to_the_config() {
    let dir = scratch("chain-file");
    std::fs::write(dir.join("chain.txt"), "2\n0.5 0.5\n0.5 0.5\n").unwrap();
    let config = write_config(&dir, "[spectrum]\nchain = \"file\"\npath = \"chain.txt\"\n");
    let out = run(&["spectrum", "--config", &config], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
