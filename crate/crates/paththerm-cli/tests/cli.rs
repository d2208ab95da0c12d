//! End-to-end tests of the command-line surface: exit codes, file outputs,
//! determinism, and config precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paththerm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn paththerm")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("paththerm_test_{name}_{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    serde_json::from_str(&text).unwrap()
}

#[test]
fn inspect_flags_multigraphs_and_simple_networks() {
    let out = run(&["inspect", "--preset", "xy_pair"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("multigraph"));

    let out = run(&["inspect", "--preset", "xy_pair", "--require-simple"]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(&["inspect", "--preset", "birth_death", "--require-simple"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("simple"));
}

#[test]
fn malformed_model_reports_location_and_exits_1() {
    let dir = tmpdir("badmodel");
    let model = dir.join("bad.rxn");
    std::fs::write(&model, "species X\nreaction X -> : 1.0\n").unwrap();
    let out = run(&["inspect", "--model", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "stderr: {}", stderr(&out));
}

#[test]
fn model_and_preset_are_mutually_exclusive() {
    let dir = tmpdir("conflict");
    let model = dir.join("m.rxn");
    std::fs::write(&model, "species X\nreaction 0 -> X : 1.0\n").unwrap();
    let out = run(&[
        "inspect",
        "--model",
        model.to_str().unwrap(),
        "--preset",
        "schlogl",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stationary_reports_residual_and_check_mode() {
    let dir = tmpdir("stationary");
    let out = run(&[
        "stationary",
        "--preset",
        "birth_death",
        "--out",
        dir.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = read_json(&dir.join("stationary_report.json"));
    assert!(report["detailed_balance_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(report["detailed_balance"], "satisfied");
    assert_eq!(report["scheme1_class"], true);
    assert!(dir.join("distribution.csv").exists());
    assert!(dir.join("run.json").exists());

    // The driven cycle violates detailed balance; --check must exit 3.
    let out = run(&[
        "stationary",
        "--preset",
        "driven_cycle",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.join("stationary_report.json"));
    assert_eq!(report["detailed_balance"], "violated");
    assert!(report["detailed_balance_residual"].as_f64().unwrap() > 1e-3);

    let out = run(&[
        "stationary",
        "--preset",
        "driven_cycle",
        "--out",
        dir.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_byte_deterministic_per_seed() {
    let dir_a = tmpdir("sim_a");
    let dir_b = tmpdir("sim_b");
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "simulate",
            "--preset",
            "schlogl",
            "--t-final",
            "2.0",
            "--seed",
            "99",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    let a = std::fs::read(dir_a.join("trajectory_000.jsonl")).unwrap();
    let b = std::fs::read(dir_b.join("trajectory_000.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let out = run(&[
        "simulate",
        "--preset",
        "schlogl",
        "--t-final",
        "2.0",
        "--seed",
        "100",
        "--out",
        dir_b.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let c = std::fs::read(dir_b.join("trajectory_000.jsonl")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn simulate_flags_absorbed_trajectories() {
    let dir = tmpdir("absorbed");
    let model = dir.join("dead.rxn");
    std::fs::write(&model, "species X\n").unwrap();
    let out = run(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--x0",
        "5",
        "--t-final",
        "1.0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("absorbed"));
    let report = read_json(&dir.join("simulate_report.json"));
    assert_eq!(report["absorbed"][0], 0);
}

#[test]
fn simulate_compare_cme_reports_tv_distance() {
    let dir = tmpdir("sim_cme");
    let out = run(&[
        "simulate",
        "--preset",
        "birth_death",
        "--events",
        "200000",
        "--compare-cme",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = read_json(&dir.join("simulate_report.json"));
    let tv = report["tv_distance_vs_cme"].as_f64().unwrap();
    assert!(tv < 0.02, "tv = {tv}");
}

#[test]
fn ft_reports_degenerate_lumped_case_and_ft_on_driven_cycle() {
    let dir = tmpdir("ft_lumped");
    let out = run(&[
        "ft",
        "--preset",
        "schlogl",
        "--kind",
        "lumped",
        "--window",
        "0.5",
        "--n-windows",
        "10000",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = read_json(&dir.join("ft_report.json"));
    assert_eq!(report["degenerate"], true);
    assert!(report["slope"].is_null());
    assert_eq!(report["symmetry_rejected"], false);
    assert!(dir.join("zhist.csv").exists());

    let dir = tmpdir("ft_cycle");
    let out = run(&[
        "ft",
        "--preset",
        "driven_cycle",
        "--window",
        "5.0",
        "--n-windows",
        "10000",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = read_json(&dir.join("ft_report.json"));
    assert_eq!(report["kind"], "lumped");
    assert_eq!(report["n_samples"], 10000);
    let lo = report["slope_ci"][0].as_f64().unwrap();
    let hi = report["slope_ci"][1].as_f64().unwrap();
    assert!(lo <= 1.0 && 1.0 <= hi, "CI [{lo}, {hi}]");
    // Positive mean entropy production shows up as an asymmetric sample set.
    assert_eq!(report["symmetry_rejected"], true);
}

#[test]
fn reversibility_separates_one_species_class_from_driven_cycle() {
    let dir = tmpdir("rev");
    let out = run(&[
        "reversibility",
        "--preset",
        "schlogl",
        "--xmax",
        "12",
        "--x0",
        "6",
        "--steps",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = read_json(&dir.join("reversibility_report.json"));
    assert_eq!(report["reversible"], true);
    assert!(report["max_gap"].as_f64().unwrap() <= 1e-10);

    let out = run(&[
        "reversibility",
        "--preset",
        "driven_cycle",
        "--steps",
        "4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.join("reversibility_report.json"));
    assert_eq!(report["reversible"], false);
    assert!(report["max_gap"].as_f64().unwrap() > 0.1);

    let out = run(&[
        "reversibility",
        "--preset",
        "birth_death",
        "--steps",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_applies_and_flags_take_precedence() {
    let dir = tmpdir("config");
    let config = dir.join("run.conf");
    std::fs::write(
        &config,
        "preset = birth_death\nseed = 7\nt_final = 1.5 # short run\nparam.kf = 2.0\n",
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let echoed = read_json(&dir.join("run.json"));
    assert_eq!(echoed["seed"], 9, "flag must override config");
    assert_eq!(echoed["t_final"], 1.5);
    assert_eq!(echoed["preset"], "birth_death");
    assert_eq!(echoed["params"]["kf"], 2.0);
}

#[test]
fn seed_falls_back_to_environment_variable() {
    let dir = tmpdir("envseed");
    let out = bin()
        .args([
            "simulate",
            "--preset",
            "birth_death",
            "--t-final",
            "1.0",
            "--out",
            dir.to_str().unwrap(),
        ])
        .env("PATHTHERM_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let echoed = read_json(&dir.join("run.json"));
    assert_eq!(echoed["seed"], 1234);
}

#[test]
fn missing_output_directory_is_a_usage_error() {
    let out = run(&["stationary", "--preset", "birth_death"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--out"));
}
