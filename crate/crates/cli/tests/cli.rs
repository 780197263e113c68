//! The `varpose` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use varpose::scenario::{run_scenario, InitialEstimate, VelocitySource};
use varpose::{NoiseSpec, ScenarioConfig};
use varpose_cli::output::{read_run_csv, record_values, COLUMNS};
use varpose_cli::{load_config, parse_config};

fn varpose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varpose"))
        .args(args)
        .env_remove("VARPOSE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/two_uav.toml")
}

fn assert_svg(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(doc.descendants().any(|n| n.tag_name().name() == "path"));
    assert!(text.contains("time (s)"));
}

#[test]
fn committed_example_is_the_preset() {
    assert_eq!(load_config(&repo_config()).unwrap(), ScenarioConfig::paper());
}

#[test]
fn paper_scenario_writes_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = varpose(&["paper-scenario", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let csv = dir.path().join("run_lgvi.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1001);
    let (header, rows) = read_run_csv(&csv).unwrap();
    assert_eq!(header, COLUMNS);
    assert!(rows.iter().all(|r| r.len() == COLUMNS.len()));

    // parse-back reproduces the library's numbers bit for bit
    let run = run_scenario(&ScenarioConfig::paper()).unwrap();
    for (row, rec) in rows.iter().zip(&run.records) {
        let expected = record_values(rec);
        for (k, (a, b)) in row.iter().zip(&expected).enumerate() {
            assert_eq!(a.to_bits(), b.to_bits(), "column {}", COLUMNS[k]);
        }
    }

    for name in ["attitude", "position", "velocity"] {
        assert_svg(&dir.path().join(format!("run_lgvi_{name}.svg")));
    }
    // the effective config is saved next to the outputs and reloads
    assert_eq!(load_config(&dir.path().join("config.toml")).unwrap(), ScenarioConfig::paper());
}

#[test]
fn both_modes_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = repo_config();
    let o = varpose(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", out, "--mode", "both", "--steps", "200", "--dt", "0.02",
        "--seed", "7", "--no-plots",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for mode in ["lgvi", "rk4"] {
        let text = std::fs::read_to_string(dir.path().join(format!("run_{mode}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 201);
    }
    assert!(!dir.path().join("run_lgvi_attitude.svg").exists());
    let saved = load_config(&dir.path().join("config.toml")).unwrap();
    assert_eq!((saved.dt, saved.steps(), saved.noise.seed), (0.02, 200, 7));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_varpose"))
        .args(["paper-scenario", "--steps", "10", "--no-plots"])
        .env("VARPOSE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("run_lgvi.csv").exists());
}

#[test]
fn zero_noise_equilibrium_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ScenarioConfig::paper();
    c.noise = NoiseSpec::none();
    c.velocity_source = VelocitySource::Truth;
    c.initial_estimate = InitialEstimate::Twist {
        pose: c.truth.initial_pose,
        xi_hat: c.truth.profile.at(0.0),
    };
    let cfg = dir.path().join("eq.toml");
    std::fs::write(&cfg, varpose_cli::config::to_toml(&c)).unwrap();
    let o = varpose(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_run_csv(&dir.path().join("run_lgvi.csv")).unwrap();
    let error_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.contains("_err_") || h.as_str() == "principal_angle_rad")
        .map(|(i, _)| i)
        .collect();
    assert_eq!(error_cols.len(), 13);
    for row in &rows {
        for &k in &error_cols {
            assert!(row[k].abs() <= 1e-9, "{} = {}", header[k], row[k]);
        }
    }
    assert_svg(&dir.path().join("run_lgvi_attitude.svg"));
}

#[test]
fn sweep_writes_keyed_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = varpose(&[
        "sweep", "--out", dir.path().to_str().unwrap(), "--seeds", "2", "--noise-mm", "0,5", "--steps", "300",
        "--workers", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut r = csv::Reader::from_path(dir.path().join("sweep_summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert!(dir.path().join(format!("sweep_{}.csv", &row[0])).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // 3: missing config file
    let o = varpose(&["run", "--config", d.join("nope.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    // 1: unknown key
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "dt = 0.01\nspeed = 3\n").unwrap();
    let o = varpose(&["run", "--config", bad.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("speed"), "{}", stderr(&o));

    // 1: a singular gain, reported against its key
    let sing = d.join("singular.toml");
    std::fs::write(&sing, "[gains]\nj = [[0.9, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.3]]\n").unwrap();
    let o = varpose(&["run", "--config", sing.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gains.j"), "{}", stderr(&o));

    // 2: Newton iteration capped below what the first step needs
    let newton = d.join("newton.toml");
    std::fs::write(&newton, "[newton]\nmax_iterations = 1\n").unwrap();
    let o = varpose(&["run", "--config", newton.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("Newton"));

    // 3: output directory cannot be created
    let file = d.join("plain-file");
    std::fs::write(&file, "").unwrap();
    let o = varpose(&["paper-scenario", "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    // 1: bad flag value
    let o = varpose(&["paper-scenario", "--mode", "euler"]);
    assert_eq!(code(&o), 1);
}

fn read_report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("check_report.json")).unwrap()).unwrap()
}

#[test]
fn check_reports_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = varpose(&["check", "--out", dir.path().to_str().unwrap()]);
    let report = read_report(dir.path());
    let criteria = report["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 10);
    assert!(report["run_audit"]["newton_max_iterations"].as_u64().unwrap() >= 1);
    let failing: Vec<u64> = criteria
        .iter()
        .filter(|c| !c["passed"].as_bool().unwrap())
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    // Strict per-step energy monotonicity is not met by the first-order
    // integrator at dt = 0.01 (see README); everything else must pass.
    assert!(failing.iter().all(|&id| id == 3), "failing criteria {failing:?}");
    assert_eq!(code(&o), if failing.is_empty() { 0 } else { 1 });
}

#[test]
fn tampered_gain_fails_a_named_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tampered.toml");
    std::fs::write(&cfg, "[gains]\nd_r = [[-2.7, 0.0, 0.0], [0.0, 2.2, 0.0], [0.0, 0.0, 1.5]]\n").unwrap();
    let o = varpose(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let report = read_report(dir.path());
    assert_eq!(report["passed"], false);
    let named = report["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "noise-free-convergence")
        .unwrap();
    assert_eq!(named["passed"], false);
    assert!(named["detail"].as_str().unwrap().contains("Dr"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] criterion  2 noise-free-convergence"));
}

#[test]
fn write_config_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("preset.toml");
    let o = varpose(&["paper-scenario", "--write-config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(parse_config(&text, "preset").unwrap(), ScenarioConfig::paper());
}
