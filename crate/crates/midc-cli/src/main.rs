//! `midc` — scenario simulation, droop design, verification and
//! optimal-vs-average comparison for multi-infeed hybrid AC-DC grids.
//!
//! Every failure path exits nonzero and writes exactly one
//! machine-parseable record to stderr: `error code=<kind> message="..."`.
//! Exit codes: 2 for input problems, 3 for solver failures (a partial
//! trajectory is still written), 1 for failed verification or comparison
//! checks.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use midc::dynamics::{simulate_model, steady_state, SimModel, SolveError, Trajectory};
use midc::grid::{bundled_fixture, DroopSelection, Objective, SystemSpec};
use midc::oefc::{resolve_coefficients, solve_oefc_oracle, OefcError};
use midc::pd::{pre_event_angles, verify_equivalence};
use midc::report::{
    fmt_pu, settling_time_s, Check, CheckStatus, CompareReport, DesignReport, RunReport,
    VerifyReport,
};
use midc::stability::{lyapunov_decrease_report, trajectory_security, LyapunovConfig};

#[derive(Parser)]
#[command(
    name = "midc",
    version,
    about = "Coordinated-droop emergency frequency control for hybrid AC-DC grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and export the trajectory and run report
    Simulate(SimulateArgs),
    /// Print the droop coefficient tables for an objective
    Design(DesignArgs),
    /// Check steady-state optimality, primal-dual equivalence and the
    /// Lyapunov certificate
    Verify(VerifyArgs),
    /// Simulate optimal versus average droop and compare total costs
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum FormatArg {
    #[default]
    Text,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum DroopArg {
    Optimal,
    Average,
    Manual,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file path, or the name of a bundled fixture
    /// (three_bus_minimal, new_england_midc, g6_trip)
    #[arg(long)]
    scenario: String,
    /// Override the scenario's dead-zone width (Hz)
    #[arg(long)]
    dead_zone_hz: Option<f64>,
    /// Override the droop coefficient selection
    #[arg(long, value_enum)]
    droop: Option<DroopArg>,
    /// Override the control objective (1 or 2)
    #[arg(long)]
    objective: Option<u8>,
    /// Override the simulation horizon (s)
    #[arg(long)]
    horizon_s: Option<f64>,
    /// Report rendering
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory for the trajectory and report files
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scale factor on the certified Lyapunov weights d = 1/k_D
    /// (diagnostic; values ≠ 1 void the certificate)
    #[arg(long, default_value_t = 1.0)]
    d_scale: f64,
    /// Optional directory for the verification report file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Optional directory for the comparison report file
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    exit: i32,
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(exit: i32, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit,
            code,
            message: message.into(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            emit_error(&Failure::new(2, "usage", e.to_string().replace('\n', " ")));
            std::process::exit(2);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Design(args) => cmd_design(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Compare(args) => cmd_compare(args),
    };
    if let Err(failure) = result {
        emit_error(&failure);
        std::process::exit(failure.exit);
    }
}

fn emit_error(failure: &Failure) {
    eprintln!(
        "error code={} message=\"{}\"",
        failure.code,
        failure.message.replace('"', "'")
    );
}

fn load_spec(scenario: &str) -> Result<SystemSpec, Failure> {
    let text = if Path::new(scenario).exists() {
        fs::read_to_string(scenario)
            .map_err(|e| Failure::new(2, "scenario_unreadable", format!("{scenario}: {e}")))?
    } else if let Some(bundled) = bundled_fixture(scenario) {
        bundled.to_string()
    } else {
        return Err(Failure::new(
            2,
            "scenario_not_found",
            format!("scenario not found: {scenario}"),
        ));
    };
    midc::grid::load_system(&text).map_err(|e| Failure::new(2, "parse_error", e.to_string()))
}

fn apply_overrides(spec: &mut SystemSpec, common: &CommonArgs) -> Result<(), Failure> {
    if let Some(hz) = common.dead_zone_hz {
        if hz < 0.0 {
            return Err(Failure::new(2, "usage", "--dead-zone-hz must be ≥ 0"));
        }
        spec.scenario.control.dead_zone_pu = spec.network.bases().hz_to_pu(hz);
    }
    if let Some(droop) = common.droop {
        spec.scenario.control.selection = match droop {
            DroopArg::Optimal => DroopSelection::Optimal,
            DroopArg::Average => DroopSelection::Average,
            DroopArg::Manual => DroopSelection::Manual,
        };
    }
    if let Some(objective) = common.objective {
        spec.scenario.control.objective = match objective {
            1 => Objective::RegulationMargin,
            2 => Objective::AdjacentFrequency,
            other => {
                return Err(Failure::new(
                    2,
                    "usage",
                    format!("--objective must be 1 or 2, got {other}"),
                ))
            }
        };
    }
    if let Some(horizon) = common.horizon_s {
        if horizon <= 0.0 {
            return Err(Failure::new(2, "usage", "--horizon-s must be positive"));
        }
        spec.scenario.sim.horizon_s = horizon;
    }
    Ok(())
}

fn oefc_failure(e: OefcError) -> Failure {
    let code = match e {
        OefcError::MissingParameter { .. } => "missing_parameter",
        _ => "config_error",
    };
    Failure::new(2, code, e.to_string())
}

fn solver_failure(e: SolveError) -> Failure {
    Failure::new(3, "solver_error", e.to_string())
}

/// Builds the model pair (pre-event, post-event) for a spec.
fn build_models(spec: &SystemSpec) -> Result<(SimModel, SimModel), Failure> {
    let coefficients =
        resolve_coefficients(&spec.network, &spec.scenario.control).map_err(oefc_failure)?;
    let model = SimModel::build(
        &spec.network,
        &coefficients,
        spec.scenario.control.dead_zone_pu,
    );
    let post = model
        .after_events(&spec.scenario.events)
        .map_err(solver_failure)?;
    Ok((model, post))
}

fn run_report(spec: &SystemSpec, post: &SimModel, trajectory: &Trajectory) -> RunReport {
    let bases = spec.network.bases();
    let terminal = trajectory.terminal();
    let terminal_omega = Trajectory::system_omega_pu(terminal);
    let u_gen_pu = post
        .gens
        .iter()
        .map(|g| (g.bus, -g.k_eff * terminal.omega_pu[g.bus]))
        .collect();
    let u_lcc_pu = post
        .lccs
        .iter()
        .enumerate()
        .filter(|(_, u)| !u.blocked)
        .map(|(l, unit)| (unit.bus, terminal.pdc_pu[l] - unit.p_nominal_pu))
        .collect::<Vec<_>>();
    let dc_terminal = post
        .lccs
        .iter()
        .enumerate()
        .map(|(l, unit)| {
            let order_mw = bases.pu_to_mw(unit.sign * terminal.pdc_pu[l]);
            let i_ka = midc::droop::current_order_ka(order_mw, unit.params.dc_voltage_kv)
                .unwrap_or(f64::NAN);
            (unit.bus, terminal.pdc_pu[l], order_mw, i_ka)
        })
        .collect();
    let total_cost = post
        .oefc_problem(
            spec.scenario.control.objective,
            spec.scenario.control.margin_direction,
        )
        .ok()
        .map(|problem| {
            let u_gen: Vec<f64> = post
                .gens
                .iter()
                .map(|g| -g.k_eff * terminal.omega_pu[g.bus])
                .collect();
            let u_lcc: Vec<f64> = u_lcc_pu.iter().map(|&(_, u)| u).collect();
            problem.total_cost(&u_gen, &u_lcc)
        });
    RunReport {
        scenario: spec.name.clone(),
        terminal_frequency_hz: bases.pu_to_frequency_hz(terminal_omega),
        terminal_omega_pu: terminal_omega,
        settling_time_s: settling_time_s(trajectory, 0.02, trajectory.last_event_time_s()),
        settling_band_hz: 0.02,
        u_gen_pu,
        u_lcc_pu,
        dc_terminal,
        total_cost,
        objective: spec.scenario.control.objective,
        checks: Vec::new(),
        outputs: Vec::new(),
        failure: trajectory.failure.clone(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| {
            Failure::new(2, "output_unwritable", format!("{}: {e}", parent.display()))
        })?;
    }
    fs::write(path, contents)
        .map_err(|e| Failure::new(2, "output_unwritable", format!("{}: {e}", path.display())))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut spec = load_spec(&args.common.scenario)?;
    apply_overrides(&mut spec, &args.common)?;
    let (model, post) = build_models(&spec)?;
    let trajectory = simulate_model(model, &spec.scenario).map_err(solver_failure)?;

    let stem = spec.name.clone();
    let trajectory_path = args.out.join(format!("{stem}_trajectory.csv"));
    write_file(&trajectory_path, &trajectory.to_csv())?;

    // The persisted body stays byte-identical across output locations;
    // the paths are stdout feedback only.
    let mut report = run_report(&spec, &post, &trajectory);
    let report_path = match args.common.format {
        FormatArg::Text => args.out.join(format!("{stem}_report.txt")),
        FormatArg::Rows => args.out.join(format!("{stem}_report.tsv")),
    };
    let body = match args.common.format {
        FormatArg::Text => report.to_text(),
        FormatArg::Rows => report.to_rows(),
    };
    write_file(&report_path, &body)?;
    report.outputs.push(trajectory_path.display().to_string());
    report.outputs.push(report_path.display().to_string());
    print!("{body}");
    for path in &report.outputs {
        println!("wrote: {path}");
    }

    if let Some(failure) = &trajectory.failure {
        return Err(Failure::new(
            3,
            "solver_failure",
            format!("integration stopped early: {failure} (partial trajectory written)"),
        ));
    }
    Ok(())
}

fn cmd_design(args: DesignArgs) -> Result<(), Failure> {
    let mut spec = load_spec(&args.common.scenario)?;
    apply_overrides(&mut spec, &args.common)?;
    let mut control = spec.scenario.control.clone();
    control.selection = DroopSelection::Optimal;
    let coefficients = resolve_coefficients(&spec.network, &control).map_err(oefc_failure)?;

    let gen_rows: Vec<(String, usize, f64)> = coefficients
        .gen_k
        .iter()
        .enumerate()
        .map(|(i, (&bus, &k))| (format!("G{}", i + 1), bus, k))
        .collect();
    let lcc_rows: Vec<(String, usize, f64)> = coefficients
        .lcc_k
        .iter()
        .enumerate()
        .map(|(i, (&bus, &k))| (format!("LCC{}", i + 1), bus, k))
        .collect();
    let gen_average = (!gen_rows.is_empty())
        .then(|| gen_rows.iter().map(|r| r.2).sum::<f64>() / gen_rows.len() as f64);
    let lcc_average = (!lcc_rows.is_empty())
        .then(|| lcc_rows.iter().map(|r| r.2).sum::<f64>() / lcc_rows.len() as f64);

    // Optimal allocation of the post-event imbalance, with per-unit costs
    // and the dual value.
    let allocation = design_allocation(&spec, &control, &gen_rows, &lcc_rows);
    let report = DesignReport {
        scenario: spec.name.clone(),
        objective: control.objective,
        gen_rows,
        lcc_rows,
        gen_average,
        lcc_average,
        allocation,
    };
    match args.common.format {
        FormatArg::Text => print!("{}", report.to_text()),
        FormatArg::Rows => print!("{}", report.to_rows()),
    }
    Ok(())
}

/// Oracle allocation of the scenario's post-event imbalance for the design
/// report; `None` when the problem cannot be formed (missing costs, no
/// units left).
fn design_allocation(
    spec: &SystemSpec,
    control: &midc::grid::ControlConfig,
    gen_rows: &[(String, usize, f64)],
    lcc_rows: &[(String, usize, f64)],
) -> Option<midc::report::AllocationReport> {
    let coefficients = resolve_coefficients(&spec.network, control).ok()?;
    let model = SimModel::build(&spec.network, &coefficients, 0.0);
    let post = model.after_events(&spec.scenario.events).ok()?;
    let problem = post
        .oefc_problem(control.objective, control.margin_direction)
        .ok()?;
    let solution = solve_oefc_oracle(&problem, 1e-12).ok()?;

    let mut rows = Vec::new();
    for ((label, bus, _), (gc, u)) in gen_rows
        .iter()
        .filter(|(_, bus, _)| post.gens.iter().any(|g| g.bus == *bus))
        .zip(problem.generators.iter().zip(&solution.u_gen_pu))
    {
        rows.push((
            label.clone(),
            *bus,
            *u,
            midc::oefc::cost_generator(*u, gc.beta),
        ));
    }
    for ((label, bus, _), (lc, u)) in lcc_rows
        .iter()
        .filter(|(_, bus, _)| post.lccs.iter().any(|l| l.bus == *bus && !l.blocked))
        .zip(problem.lccs.iter().zip(&solution.u_lcc_pu))
    {
        rows.push((
            label.clone(),
            *bus,
            *u,
            midc::oefc::cost_lcc(*u, &lc.weights),
        ));
    }
    Some(midc::report::AllocationReport {
        imbalance_pu: problem.imbalance_pu,
        lambda: solution.lambda,
        rows,
        total_cost: solution.total_cost,
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let mut spec = load_spec(&args.common.scenario)?;
    apply_overrides(&mut spec, &args.common)?;
    let had_dead_zone = spec.scenario.control.dead_zone_pu > 0.0;
    // Certified regime: the analysis excludes the dead zone.
    spec.scenario.control.dead_zone_pu = 0.0;
    let (model, post) = build_models(&spec)?;
    let checks = vec![
        // Steady state against the allocation oracle.
        optimality_check(&spec, &post),
        // Primal-dual equivalence in the instantaneous-LCC regime.
        equivalence_check(&spec, &model, &post),
        // Lyapunov decrease along the simulated trajectory.
        lyapunov_check(&spec, &model, &post, args.d_scale, had_dead_zone),
    ];

    let report = VerifyReport {
        scenario: spec.name.clone(),
        checks,
    };
    let body = match args.common.format {
        FormatArg::Text => report.to_text(),
        FormatArg::Rows => report.to_rows(),
    };
    print!("{body}");
    if let Some(dir) = &args.out {
        let path = dir.join(format!("{}_verify.txt", spec.name));
        write_file(&path, &body)?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| matches!(c.status, CheckStatus::Fail))
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::new(
            1,
            "verification_failed",
            format!("failed checks: {}", failed.join(", ")),
        ))
    }
}

fn optimality_check(spec: &SystemSpec, post: &SimModel) -> Check {
    let equilibrium = match steady_state(post) {
        Ok(eq) => eq,
        Err(e) => {
            return Check {
                name: "steady_state_optimality".into(),
                status: CheckStatus::Fail,
                detail: e.to_string(),
            }
        }
    };
    if equilibrium.saturated.iter().any(|&s| s) {
        return Check {
            name: "steady_state_optimality".into(),
            status: CheckStatus::Skipped("boundary regime".into()),
            detail: "an LCC regulation box binds; interior optimality not applicable".into(),
        };
    }
    let problem = match post.oefc_problem(
        spec.scenario.control.objective,
        spec.scenario.control.margin_direction,
    ) {
        Ok(p) => p,
        Err(e) => {
            return Check {
                name: "steady_state_optimality".into(),
                status: CheckStatus::Skipped("cost parameters missing".into()),
                detail: e.to_string(),
            }
        }
    };
    let oracle = match solve_oefc_oracle(&problem, 1e-12) {
        Ok(s) => s,
        Err(e) => {
            return Check {
                name: "steady_state_optimality".into(),
                status: CheckStatus::Fail,
                detail: e.to_string(),
            }
        }
    };
    let mut worst = (oracle.lambda - equilibrium.omega_syn_pu).abs();
    for ((_, u), o) in equilibrium.u_gen_pu.iter().zip(&oracle.u_gen_pu) {
        worst = worst.max((u - o).abs());
    }
    for ((_, u), o) in equilibrium.u_lcc_pu.iter().zip(&oracle.u_lcc_pu) {
        worst = worst.max((u - o).abs());
    }
    Check {
        name: "steady_state_optimality".into(),
        status: if worst <= 1e-4 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: format!("max |closed loop − oracle| = {}", fmt_pu(worst)),
    }
}

fn equivalence_check(spec: &SystemSpec, model: &SimModel, post: &SimModel) -> Check {
    if post.lccs.iter().any(|l| l.blocked || l.k_d <= 0.0) {
        return Check {
            name: "primal_dual_equivalence".into(),
            status: CheckStatus::Skipped("needs every LCC active with positive droop".into()),
            detail: String::new(),
        };
    }
    let theta0 = match pre_event_angles(model) {
        Ok(t) => t,
        Err(e) => {
            return Check {
                name: "primal_dual_equivalence".into(),
                status: CheckStatus::Fail,
                detail: e.to_string(),
            }
        }
    };
    match verify_equivalence(post, &theta0, 10.0, spec.scenario.sim.dt_s, 0.01) {
        Ok(report) => Check {
            name: "primal_dual_equivalence".into(),
            status: if report.pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: format!(
                "max |λ−ω| = {}, max |ν−P| = {}, threshold {}",
                fmt_pu(report.max_lambda_err),
                fmt_pu(report.max_nu_err),
                fmt_pu(report.threshold)
            ),
        },
        Err(e) => Check {
            name: "primal_dual_equivalence".into(),
            status: CheckStatus::Fail,
            detail: e.to_string(),
        },
    }
}

fn lyapunov_check(
    spec: &SystemSpec,
    model: &SimModel,
    post: &SimModel,
    d_scale: f64,
    had_dead_zone: bool,
) -> Check {
    let name = "lyapunov_decrease".to_string();
    let fail = |detail: String| Check {
        name: name.clone(),
        status: CheckStatus::Fail,
        detail,
    };
    let equilibrium = match steady_state(post) {
        Ok(eq) => eq,
        Err(e) => return fail(e.to_string()),
    };
    let trajectory = match simulate_model(model.clone(), &spec.scenario) {
        Ok(t) => t,
        Err(e) => return fail(e.to_string()),
    };
    if let Some(failure) = &trajectory.failure {
        return fail(format!("simulation stopped early: {failure}"));
    }
    let mut config = match LyapunovConfig::certified(post, equilibrium) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    for d in &mut config.d {
        *d *= d_scale;
    }
    let reference = match post.reference_bus() {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let samples = trajectory.samples_from(trajectory.last_event_time_s());
    let security = trajectory_security(samples, &trajectory);
    let report = lyapunov_decrease_report(samples, post, &config, reference);
    let min_v = report
        .series
        .iter()
        .map(|(_, v, _)| *v)
        .fold(f64::MAX, f64::min);
    let max_vdot = report
        .series
        .iter()
        .map(|(_, _, vd)| *vd)
        .filter(|vd| vd.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);

    // ∇²V blocks and the angle-Hessian spectrum at the terminal state.
    let terminal = trajectory.terminal();
    let (angle_ok, kinetic_ok, dc_ok) =
        midc::stability::hessian_blocks_positive(&terminal.theta_rad, post, &config, 1e-9);
    let spectrum = midc::stability::symmetric_spectrum(&midc::stability::hessian_fc(
        &terminal.theta_rad,
        &post.lines,
        post.n,
    ));
    let blocks_ok = angle_ok && kinetic_ok && dc_ok;

    let ok = report.violations.is_empty() && min_v >= -1e-12 && security.secure && blocks_ok;
    let mut detail = format!(
        "max V = {}, max V̇ = {}, V̇ violations = {}, security margin = {:.4} rad, \
         H_c spectrum [{}, {}, …], ∇²V blocks positive: {}",
        fmt_pu(report.max_v),
        fmt_pu(max_vdot),
        report.violations.len(),
        security.worst_margin_rad,
        fmt_pu(spectrum[0]),
        fmt_pu(spectrum[1]),
        if blocks_ok { "yes" } else { "NO" }
    );
    if had_dead_zone {
        detail.push_str("; dead zone excluded from the certified analysis");
    }
    if d_scale != 1.0 {
        detail.push_str(&format!("; diagnostic weights d = {d_scale}/k_D"));
    }
    Check {
        name,
        status: if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail,
    }
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let mut spec = load_spec(&args.common.scenario)?;
    apply_overrides(&mut spec, &args.common)?;
    let objective = spec.scenario.control.objective;

    let run_with = |selection: DroopSelection| -> Result<(RunReport, f64), Failure> {
        let mut variant = spec.clone();
        variant.scenario.control.selection = selection;
        let (model, post) = build_models(&variant)?;
        let trajectory = simulate_model(model, &variant.scenario).map_err(solver_failure)?;
        if let Some(failure) = &trajectory.failure {
            return Err(Failure::new(
                3,
                "solver_failure",
                format!("integration stopped early: {failure}"),
            ));
        }
        let report = run_report(&variant, &post, &trajectory);
        let cost = report.total_cost.ok_or_else(|| {
            Failure::new(
                2,
                "missing_parameter",
                "cost parameters missing for the selected objective",
            )
        })?;
        Ok((report, cost))
    };

    // The two runs are independent; run them concurrently.
    let (optimal, average) = std::thread::scope(|scope| {
        let a = scope.spawn(|| run_with(DroopSelection::Optimal));
        let b = scope.spawn(|| run_with(DroopSelection::Average));
        (a.join().expect("no panic"), b.join().expect("no panic"))
    });
    let (optimal, cost_optimal) = optimal?;
    let (average, cost_average) = average?;

    // Equality is legitimate exactly when the coefficient sets coincide.
    let coeff_opt = resolve_coefficients(&spec.network, &{
        let mut c = spec.scenario.control.clone();
        c.selection = DroopSelection::Optimal;
        c
    })
    .map_err(oefc_failure)?;
    let coeff_avg = resolve_coefficients(&spec.network, &{
        let mut c = spec.scenario.control.clone();
        c.selection = DroopSelection::Average;
        c
    })
    .map_err(oefc_failure)?;
    let coefficients_coincide = coeff_opt
        .gen_k
        .iter()
        .all(|(bus, k)| (coeff_avg.gen_k[bus] - k).abs() < 1e-12)
        && coeff_opt
            .lcc_k
            .iter()
            .all(|(bus, k)| (coeff_avg.lcc_k[bus] - k).abs() < 1e-12);
    let ordering_holds = if coefficients_coincide {
        (cost_optimal - cost_average).abs() <= 1e-9 * cost_average.abs().max(1.0)
    } else {
        cost_optimal <= cost_average
    };

    let report = CompareReport {
        scenario: spec.name.clone(),
        objective,
        optimal,
        average,
        cost_optimal,
        cost_average,
        ordering_holds,
    };
    let body = match args.common.format {
        FormatArg::Text => report.to_text(),
        FormatArg::Rows => report.to_rows(),
    };
    print!("{body}");
    if let Some(dir) = &args.out {
        let path = dir.join(format!("{}_compare.txt", spec.name));
        write_file(&path, &body)?;
    }
    if report.ordering_holds {
        Ok(())
    } else {
        Err(Failure::new(
            1,
            "comparison_failed",
            format!(
                "cost(optimal) {} exceeds cost(average) {}",
                fmt_pu(cost_optimal),
                fmt_pu(cost_average)
            ),
        ))
    }
}
