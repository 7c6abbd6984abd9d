//! End-to-end tests of the `midc` binary: command surfaces, exit codes,
//! output files and the single-error-record contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn midc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Exactly one machine-parseable record on stderr.
fn assert_single_error_record(output: &Output, code: &str) {
    let err = stderr(output);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "expected one error record, got: {err}");
    assert!(
        lines[0].starts_with(&format!("error code={code} message=\"")),
        "unexpected record: {}",
        lines[0]
    );
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const STEP_3BUS: &str = "\
[network]
name = step_3bus
power_base_mva = 100.0
nominal_frequency_hz = 50.0
[generators]
gen bus=0 p=1.5 inertia=10.0 damping=0.5 governor_droop=9.5 beta=0.1
[lccs]
lcc bus=1 p=0.0 p_nominal_mw=500 p_max_mw=650 p_min_mw=400 direction=import t_d_s=0.1 alpha=0.05 kf=25.0 e=30.0 u_dc_kv=500
[buses]
bus id=2 p=-6.5
[lines]
line from=0 to=1 b=10.0
line from=1 to=2 b=10.0
[events]
power_step t_s=1.0 bus=2 delta=-1.0
[control]
objective = 1
droop = optimal
margin_direction = increase
dead_zone_hz = 0.0
horizon_s = 20.0
dt_s = 0.001
output_every_s = 0.01
";

#[test]
fn simulate_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let output = midc(&[
        "simulate",
        "--scenario",
        "three_bus_minimal",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let trajectory = out.join("three_bus_minimal_trajectory.csv");
    let report = out.join("three_bus_minimal_report.txt");
    assert!(trajectory.exists() && report.exists());
    let csv = fs::read_to_string(&trajectory).unwrap();
    assert!(csv.starts_with("time_s,omega_pu_bus0"));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("terminal frequency: 50.000000 Hz"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "step.cfg", STEP_3BUS);
    let mut bodies = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let output = midc(&[
            "simulate",
            "--scenario",
            &scenario,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
        bodies.push((
            fs::read(out.join("step_3bus_trajectory.csv")).unwrap(),
            fs::read(out.join("step_3bus_report.txt")).unwrap(),
        ));
    }
    assert_eq!(bodies[0].0, bodies[1].0, "trajectory bodies differ");
    assert_eq!(bodies[0].1, bodies[1].1, "report bodies differ");
}

#[test]
fn missing_scenario_exits_2_with_one_record() {
    let output = midc(&[
        "simulate",
        "--scenario",
        "no_such_file.cfg",
        "--out",
        "/tmp",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert_single_error_record(&output, "scenario_not_found");
}

#[test]
fn solver_failure_exits_3_with_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    // A 20 p.u. load step exceeds the line capacity (B = 10): the flow
    // becomes infeasible when the event applies at t = 1 s.
    let body = STEP_3BUS.replace("delta=-1.0", "delta=-20.0");
    let scenario = write_scenario(dir.path(), "infeasible.cfg", &body);
    let out = dir.path().join("results");
    let output = midc(&[
        "simulate",
        "--scenario",
        &scenario,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert_single_error_record(&output, "solver_failure");
    // The pre-failure second of trajectory is still on disk, flagged.
    let csv = fs::read_to_string(out.join("step_3bus_trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 50);
    let report = fs::read_to_string(out.join("step_3bus_report.txt")).unwrap();
    assert!(report.contains("status: FAILED"));
}

#[test]
fn design_prints_reference_tables() {
    let output = midc(&[
        "design",
        "--scenario",
        "new_england_midc",
        "--objective",
        "1",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("1.10250000e1"), "{text}");
    assert!(text.contains("1.44000000e1"));
    assert!(text.contains("8.10000000e0"));
    assert!(text.contains("average k_D = 1.08812500e1"));

    let output = midc(&[
        "design",
        "--scenario",
        "new_england_midc",
        "--objective",
        "2",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("1.04166667e1"));
    assert!(text.contains("1.50000000e1"));

    // With an event in the scenario the report also allocates the
    // post-event imbalance and shows the dual value.
    let output = midc(&["design", "--scenario", "g6_trip", "--objective", "1"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(
        text.contains("allocation of imbalance -5.30000000e0"),
        "{text}"
    );
    assert!(text.contains("dual λ = -6.34540557e-2"), "{text}");
}

#[test]
fn design_without_kf_reports_missing_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let body = STEP_3BUS.replace(" kf=25.0 e=30.0", "");
    let scenario = write_scenario(dir.path(), "no_kf.cfg", &body);
    let output = midc(&["design", "--scenario", &scenario, "--objective", "2"]);
    assert_eq!(output.status.code(), Some(2));
    assert_single_error_record(&output, "missing_parameter");
}

#[test]
fn verify_passes_on_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "step.cfg", STEP_3BUS);
    let output = midc(&["verify", "--scenario", &scenario]);
    assert!(output.status.success(), "{}", stdout(&output));
    let text = stdout(&output);
    assert!(text.contains("check steady_state_optimality: pass"));
    assert!(text.contains("check primal_dual_equivalence: pass"));
    assert!(text.contains("check lyapunov_decrease: pass"));
}

#[test]
fn verify_with_adversarial_weights_fails() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "step.cfg", STEP_3BUS);
    let output = midc(&["verify", "--scenario", &scenario, "--d-scale", "100.0"]);
    assert_eq!(output.status.code(), Some(1));
    assert_single_error_record(&output, "verification_failed");
    assert!(stdout(&output).contains("check lyapunov_decrease: fail"));
}

#[test]
fn verify_skips_optimality_when_a_box_binds() {
    let dir = tempfile::tempdir().unwrap();
    // A 4 p.u. load loss pushes the link to its lower power bound.
    let body = STEP_3BUS.replace("delta=-1.0", "delta=4.0");
    let scenario = write_scenario(dir.path(), "saturated.cfg", &body);
    let output = midc(&["verify", "--scenario", &scenario]);
    let text = stdout(&output);
    assert!(
        text.contains("check steady_state_optimality: skipped: boundary regime"),
        "{text}"
    );
    assert!(output.status.success(), "{text}");
}

#[test]
fn compare_orders_costs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "step.cfg", STEP_3BUS);
    let output = midc(&["compare", "--scenario", &scenario, "--objective", "1"]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("cost(optimal) ≤ cost(average): yes"));
}

#[test]
fn dead_zone_flag_overrides_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "step.cfg", STEP_3BUS);
    let mut terminals = Vec::new();
    for (sub, dz) in [("a", "0.0"), ("b", "0.2")] {
        let out = dir.path().join(sub);
        let output = midc(&[
            "simulate",
            "--scenario",
            &scenario,
            "--dead-zone-hz",
            dz,
            "--out",
            out.to_str().unwrap(),
            "--format",
            "rows",
        ]);
        assert!(output.status.success());
        let rows = fs::read_to_string(out.join("step_3bus_report.tsv")).unwrap();
        let omega: f64 = rows
            .lines()
            .find(|l| l.starts_with("terminal_omega_pu\t"))
            .and_then(|l| l.split('\t').nth(1))
            .unwrap()
            .parse()
            .unwrap();
        terminals.push(omega);
    }
    // Post-fault |ω_syn| ≈ 0.031 clears the 0.004 p.u. band: identical
    // steady states.
    assert!((terminals[0] - terminals[1]).abs() < 1e-9);
}
