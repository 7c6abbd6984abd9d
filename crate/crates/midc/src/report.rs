//! Report structures shared by the CLI commands, with deterministic text
//! and machine-readable row renderings. Per-unit values print with nine
//! significant digits; coefficient tables also show the two-decimal
//! rounding used for reference comparisons.

use crate::dynamics::Trajectory;
use crate::grid::Objective;

/// Nine significant digits, locale-free.
pub fn fmt_pu(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped(String),
}

impl std::fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CheckStatus::Pass => write!(f, "pass"),
            CheckStatus::Fail => write!(f, "fail"),
            CheckStatus::Skipped(why) => write!(f, "skipped: {why}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

/// Settling time: seconds from `fault_time_s` until the system frequency
/// last leaves the ±`band_hz` band around its terminal value. `None` when
/// the trajectory never settles into the band.
pub fn settling_time_s(trajectory: &Trajectory, band_hz: f64, fault_time_s: f64) -> Option<f64> {
    let nominal = trajectory.bases.nominal_frequency_hz;
    let terminal = Trajectory::system_omega_pu(trajectory.terminal()) * nominal;
    let mut last_outside: Option<usize> = None;
    for (idx, sample) in trajectory.samples.iter().enumerate() {
        if sample.time_s < fault_time_s {
            continue;
        }
        let f = Trajectory::system_omega_pu(sample) * nominal;
        if (f - terminal).abs() > band_hz {
            last_outside = Some(idx);
        }
    }
    match last_outside {
        None => Some(0.0),
        Some(idx) if idx + 1 < trajectory.samples.len() => {
            Some(trajectory.samples[idx + 1].time_s - fault_time_s)
        }
        Some(_) => None,
    }
}

/// Summary of one simulation run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub terminal_frequency_hz: f64,
    pub terminal_omega_pu: f64,
    pub settling_time_s: Option<f64>,
    pub settling_band_hz: f64,
    /// Steady generator regulations by bus.
    pub u_gen_pu: Vec<(usize, f64)>,
    /// Steady DC regulations by bus.
    pub u_lcc_pu: Vec<(usize, f64)>,
    /// Terminal converter operating point per LCC bus: signed DC power
    /// (p.u.), rectifier power order (MW) and current order (kA).
    pub dc_terminal: Vec<(usize, f64, f64, f64)>,
    /// Total allocation cost under the configured objective, when the cost
    /// parameters are available.
    pub total_cost: Option<f64>,
    pub objective: Objective,
    pub checks: Vec<Check>,
    /// Files written by the command.
    pub outputs: Vec<String>,
    pub failure: Option<String>,
}

fn objective_label(objective: Objective) -> &'static str {
    match objective {
        Objective::RegulationMargin => "1 (regulation margin)",
        Objective::AdjacentFrequency => "2 (adjacent frequency)",
    }
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("run report: {}\n", self.scenario));
        if let Some(failure) = &self.failure {
            out.push_str(&format!("status: FAILED ({failure})\n"));
        }
        out.push_str(&format!(
            "terminal frequency: {:.6} Hz ({} p.u. deviation)\n",
            self.terminal_frequency_hz,
            fmt_pu(self.terminal_omega_pu)
        ));
        match self.settling_time_s {
            Some(t) => out.push_str(&format!(
                "settling time (±{} Hz): {:.2} s\n",
                self.settling_band_hz, t
            )),
            None => out.push_str(&format!(
                "settling time (±{} Hz): not settled\n",
                self.settling_band_hz
            )),
        }
        out.push_str(&format!("objective: {}\n", objective_label(self.objective)));
        for (bus, u) in &self.u_gen_pu {
            out.push_str(&format!("u_gen bus {bus}: {}\n", fmt_pu(*u)));
        }
        for (bus, u) in &self.u_lcc_pu {
            out.push_str(&format!("u_lcc bus {bus}: {}\n", fmt_pu(*u)));
        }
        for (bus, pdc, order_mw, i_ka) in &self.dc_terminal {
            out.push_str(&format!(
                "dc bus {bus}: pdc {} p.u., order {:.3} MW, current {:.4} kA\n",
                fmt_pu(*pdc),
                order_mw,
                i_ka
            ));
        }
        if let Some(cost) = self.total_cost {
            out.push_str(&format!("total control cost: {}\n", fmt_pu(cost)));
        }
        for check in &self.checks {
            out.push_str(&format!(
                "check {}: {} ({})\n",
                check.name, check.status, check.detail
            ));
        }
        for path in &self.outputs {
            out.push_str(&format!("wrote: {path}\n"));
        }
        out
    }

    pub fn to_rows(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| out.push_str(&format!("{k}\t{v}\n"));
        row("scenario", self.scenario.clone());
        if let Some(failure) = &self.failure {
            row("failure", failure.clone());
        }
        row(
            "terminal_frequency_hz",
            format!("{:.9}", self.terminal_frequency_hz),
        );
        row("terminal_omega_pu", fmt_pu(self.terminal_omega_pu));
        row(
            "settling_time_s",
            self.settling_time_s
                .map(|t| format!("{t:.3}"))
                .unwrap_or_else(|| "unsettled".into()),
        );
        for (bus, u) in &self.u_gen_pu {
            row(&format!("u_gen_bus{bus}"), fmt_pu(*u));
        }
        for (bus, u) in &self.u_lcc_pu {
            row(&format!("u_lcc_bus{bus}"), fmt_pu(*u));
        }
        for (bus, pdc, order_mw, i_ka) in &self.dc_terminal {
            row(
                &format!("dc_bus{bus}"),
                format!("{}\t{order_mw:.3}\t{i_ka:.4}", fmt_pu(*pdc)),
            );
        }
        if let Some(cost) = self.total_cost {
            row("total_cost", fmt_pu(cost));
        }
        for check in &self.checks {
            row(&format!("check_{}", check.name), check.status.to_string());
        }
        for path in &self.outputs {
            row("output", path.clone());
        }
        out
    }
}

/// Optimal allocation of the scenario's (post-event) imbalance: per-unit
/// regulations, per-unit costs and the dual value.
#[derive(Debug, Clone)]
pub struct AllocationReport {
    pub imbalance_pu: f64,
    /// Dual of the balance constraint, the common frequency deviation.
    pub lambda: f64,
    /// (label, bus, regulation, cost) per unit, generators then LCCs.
    pub rows: Vec<(String, usize, f64, f64)>,
    pub total_cost: f64,
}

/// Coefficient table from the design command.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub scenario: String,
    pub objective: Objective,
    /// (label, bus, coefficient) per generator.
    pub gen_rows: Vec<(String, usize, f64)>,
    /// (label, bus, coefficient) per LCC.
    pub lcc_rows: Vec<(String, usize, f64)>,
    pub gen_average: Option<f64>,
    pub lcc_average: Option<f64>,
    /// Optimal allocation for the scenario's imbalance, when solvable.
    pub allocation: Option<AllocationReport>,
}

impl DesignReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "droop design: {} — objective {}\n",
            self.scenario,
            objective_label(self.objective)
        ));
        for (label, bus, k) in &self.gen_rows {
            out.push_str(&format!(
                "{label} (bus {bus}): k_G = {} ({:.2})\n",
                fmt_pu(*k),
                k
            ));
        }
        for (label, bus, k) in &self.lcc_rows {
            out.push_str(&format!(
                "{label} (bus {bus}): k_D = {} ({:.2})\n",
                fmt_pu(*k),
                k
            ));
        }
        if let Some(mean) = self.gen_average {
            out.push_str(&format!("average k_G = {} ({:.2})\n", fmt_pu(mean), mean));
        }
        if let Some(mean) = self.lcc_average {
            out.push_str(&format!("average k_D = {} ({:.2})\n", fmt_pu(mean), mean));
        }
        if let Some(allocation) = &self.allocation {
            out.push_str(&format!(
                "allocation of imbalance {} (dual λ = {}):\n",
                fmt_pu(allocation.imbalance_pu),
                fmt_pu(allocation.lambda)
            ));
            for (label, bus, u, cost) in &allocation.rows {
                out.push_str(&format!(
                    "  {label} (bus {bus}): u = {}, cost = {}\n",
                    fmt_pu(*u),
                    fmt_pu(*cost)
                ));
            }
            out.push_str(&format!(
                "  total cost = {}\n",
                fmt_pu(allocation.total_cost)
            ));
        }
        out
    }

    pub fn to_rows(&self) -> String {
        let mut out = String::new();
        for (label, bus, k) in &self.gen_rows {
            out.push_str(&format!("k_g\t{label}\t{bus}\t{}\n", fmt_pu(*k)));
        }
        for (label, bus, k) in &self.lcc_rows {
            out.push_str(&format!("k_d\t{label}\t{bus}\t{}\n", fmt_pu(*k)));
        }
        if let Some(mean) = self.gen_average {
            out.push_str(&format!("k_g_average\t\t\t{}\n", fmt_pu(mean)));
        }
        if let Some(mean) = self.lcc_average {
            out.push_str(&format!("k_d_average\t\t\t{}\n", fmt_pu(mean)));
        }
        if let Some(allocation) = &self.allocation {
            out.push_str(&format!(
                "imbalance\t\t\t{}\n",
                fmt_pu(allocation.imbalance_pu)
            ));
            out.push_str(&format!("lambda\t\t\t{}\n", fmt_pu(allocation.lambda)));
            for (label, bus, u, cost) in &allocation.rows {
                out.push_str(&format!(
                    "allocation\t{label}\t{bus}\t{}\t{}\n",
                    fmt_pu(*u),
                    fmt_pu(*cost)
                ));
            }
            out.push_str(&format!(
                "allocation_total_cost\t\t\t{}\n",
                fmt_pu(allocation.total_cost)
            ));
        }
        out
    }
}

/// Verification outcome across the optimality, equivalence and Lyapunov
/// checks.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub scenario: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| !matches!(c.status, CheckStatus::Fail))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("verification report: {}\n", self.scenario);
        for check in &self.checks {
            out.push_str(&format!(
                "check {}: {} ({})\n",
                check.name, check.status, check.detail
            ));
        }
        out
    }

    pub fn to_rows(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            out.push_str(&format!(
                "check\t{}\t{}\t{}\n",
                check.name, check.status, check.detail
            ));
        }
        out
    }
}

/// Optimal-versus-average droop comparison.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub scenario: String,
    pub objective: Objective,
    pub optimal: RunReport,
    pub average: RunReport,
    pub cost_optimal: f64,
    pub cost_average: f64,
    /// cost(optimal) ≤ cost(average), with equality only for coinciding
    /// coefficients.
    pub ordering_holds: bool,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "droop comparison: {} — objective {}\n",
            self.scenario,
            objective_label(self.objective)
        );
        out.push_str(&format!(
            "terminal frequency: optimal {:.6} Hz, average {:.6} Hz\n",
            self.optimal.terminal_frequency_hz, self.average.terminal_frequency_hz
        ));
        for ((bus, uo), (_, ua)) in self.optimal.u_lcc_pu.iter().zip(&self.average.u_lcc_pu) {
            out.push_str(&format!(
                "u_lcc bus {bus}: optimal {} | average {}\n",
                fmt_pu(*uo),
                fmt_pu(*ua)
            ));
        }
        out.push_str(&format!(
            "total cost: optimal {} | average {}\n",
            fmt_pu(self.cost_optimal),
            fmt_pu(self.cost_average)
        ));
        out.push_str(&format!(
            "cost(optimal) ≤ cost(average): {}\n",
            if self.ordering_holds { "yes" } else { "NO" }
        ));
        out
    }

    pub fn to_rows(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("cost_optimal\t{}\n", fmt_pu(self.cost_optimal)));
        out.push_str(&format!("cost_average\t{}\n", fmt_pu(self.cost_average)));
        out.push_str(&format!(
            "ordering_holds\t{}\n",
            if self.ordering_holds { "yes" } else { "no" }
        ));
        for ((bus, uo), (_, ua)) in self.optimal.u_lcc_pu.iter().zip(&self.average.u_lcc_pu) {
            out.push_str(&format!(
                "u_lcc_bus{bus}\t{}\t{}\n",
                fmt_pu(*uo),
                fmt_pu(*ua)
            ));
        }
        out
    }
}
