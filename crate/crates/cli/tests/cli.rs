use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use czreach::run::{self, RunOptions};
use czreach::Scenario;
use czreach_core::ReachResult;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_czreach"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn czreach(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Double-integrator scenario with the bundled network and custom obstacles.
fn di_variant(dir: &Path, unsafe_sets: &str, method: &str) -> PathBuf {
    let net = scenarios().join("double_integrator_net.json");
    let text = format!(
        r#"{{"schema_version": 1, "model": {{"type": "linear", "A": [[1, 1], [0, 1]], "B": [[0.5], [1]]}},
            "network": {net:?}, "initial_set": {{"lo": [2.5, -0.25], "hi": [3.0, 0.25]}}, "horizon": 5,
            "unsafe_sets": {unsafe_sets}, "method": "{method}", "seed": 7}}"#
    );
    let p = dir.join(format!("di_{method}.json"));
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn bundled_double_integrator_is_safe() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenarios().join("double_integrator.json");
    let o = czreach(&["run", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--plot", "x1,x2", "--samples", "200"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("verdict:  safe"), "{stdout}");
    for f in [run::REACH_FILE, run::REPORT_FILE, run::CONTAINMENT_FILE, run::PLOT_FILE] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let reach = ReachResult::from_json_str(&std::fs::read_to_string(dir.path().join(run::REACH_FILE)).unwrap()).unwrap();
    assert_eq!(reach.steps.len(), 6);
    let svg = std::fs::read_to_string(dir.path().join(run::PLOT_FILE)).unwrap();
    assert_eq!(svg.matches(r#"<g class="step""#).count(), 6);
    assert!(svg.contains(r#"class="unsafe""#));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(run::REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report["verdict"], "safe");
    assert_eq!(report["lp_count"].as_u64().unwrap() as usize, reach.member_counts()[1..].iter().sum::<usize>());
    let cont: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(run::CONTAINMENT_FILE)).unwrap()).unwrap();
    assert_eq!(cont["misses"].as_array().unwrap().len(), 0);
}

#[test]
fn overlapping_obstacle_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let obstacles = r#"[{"label": "everywhere", "set": {"lo": [-10, -10], "hi": [10, 10]}}]"#;
    let exact = di_variant(dir.path(), obstacles, "exact");
    let o = czreach(&["run", exact.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("unsafe-intersection-found"));
    let over = di_variant(dir.path(), obstacles, "over");
    let o = czreach(&["run", over.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict:  unknown"));
}

#[test]
fn invalid_scenario_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\n  \"schema_version\": 1,\n  \"model\": [\n").unwrap();
    let o = czreach(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("line") && err.contains("column"), "{err}");
    assert!(err.contains("broken.json"), "{err}");
}

#[test]
fn missing_network_and_bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenarios().join("double_integrator.json"))
        .unwrap()
        .replace("double_integrator_net.json", "nowhere.json");
    let p = dir.path().join("s.json");
    std::fs::write(&p, text).unwrap();
    let o = czreach(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere.json"));

    let s = scenarios().join("double_integrator.json");
    let s = s.to_str().unwrap();
    assert_eq!(code(&czreach(&["run", s, "--method", "sideways"])), 1);
    assert_eq!(code(&czreach(&["run", s, "--method", "nonlinear-exact-controller"])), 1);
    assert_eq!(code(&czreach(&["run", s, "--plot", "x1,x2"])), 1);
    assert_eq!(code(&czreach(&["frobnicate"])), 1);
    assert_eq!(code(&czreach(&["--help"])), 0);
    let o = bin().args(["run", s]).env("CZREACH_LP_TOL", "abc").output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("CZREACH_LP_TOL"));
}

#[test]
fn duffing_run_has_three_steps() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenarios().join("duffing.json");
    let o = czreach(&["run", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--samples", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reach = ReachResult::from_json_str(&std::fs::read_to_string(dir.path().join(run::REACH_FILE)).unwrap()).unwrap();
    assert_eq!(reach.steps.len(), 3);
    assert_eq!(reach.method.family(), "nonlinear");
}

#[test]
fn sample_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenarios().join("double_integrator.json");
    let s = s.to_str().unwrap();
    let o = czreach(&["sample", s, "--samples", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["samples"], 0);
    assert!(rep["steps"].as_array().unwrap().iter().all(|st| st["total"] == 0 && st["fraction"] == 1.0));

    assert_eq!(code(&czreach(&["run", s, "--out", dir.path().to_str().unwrap()])), 0);
    let reach = dir.path().join(run::REACH_FILE);
    let o = czreach(&["sample", s, "--samples", "50", "--reach", reach.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join(run::CONTAINMENT_FILE).is_file());
}

#[test]
fn plot_subcommand_and_one_dimensional_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenarios().join("double_integrator.json");
    assert_eq!(code(&czreach(&["run", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])), 0);
    let svg = dir.path().join("p.svg");
    let o = czreach(&[
        "plot",
        dir.path().join(run::REACH_FILE).to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
        "--scenario",
        s.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches(r#"<g class="step""#).count(), 6);

    // A scalar system: x+ = 0.5 x + u, u = 0.1 x.
    std::fs::write(dir.path().join("net1.json"), r#"{"layers": [{"W": [[0.1]], "v": [0.0]}]}"#).unwrap();
    let scalar = dir.path().join("scalar.json");
    std::fs::write(
        &scalar,
        r#"{"schema_version": 1, "model": {"type": "linear", "A": [[0.5]], "B": [[1]]}, "network": "net1.json",
            "initial_set": {"lo": [1], "hi": [2]}, "horizon": 2, "unsafe_sets": [], "method": "exact", "seed": 0}"#,
    )
    .unwrap();
    let out1 = dir.path().join("one");
    let o = czreach(&["run", scalar.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = czreach(&["plot", out1.join(run::REACH_FILE).to_str().unwrap(), "--out", dir.path().join("q.svg").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains('1'), "{}", stderr(&o));
    assert!(!dir.path().join("q.svg").exists());
}

#[test]
fn written_result_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario::load(&scenarios().join("double_integrator.json")).unwrap();
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let outcome = run::run(&s, &opts).unwrap();
    let back = ReachResult::from_json_str(&std::fs::read_to_string(dir.path().join(run::REACH_FILE)).unwrap()).unwrap();
    assert_eq!(back.steps, outcome.reach.steps);
    assert_eq!(back.method, outcome.reach.method);
    assert_eq!(back.over_approximate, outcome.reach.over_approximate);
}
