//! Lyapunov certificates for the closed loop.
//!
//! The energy function is a Bregman divergence of the network potential
//! F_c(θ) = Σ B(1 − cos θᵢⱼ) around the equilibrium, plus generator kinetic
//! energy and a weighted quadratic in the DC power mismatches:
//!
//! ```text
//!   V₁ = F_c(θ) − F_c(θ*) − ∇F_c(θ*)ᵀ(θ − θ*) + ½ (ω_G−ω_G*)ᵀ M (ω_G−ω_G*)
//!   V₂ = Σ ½ dᵢ Tᴰᵢ (pᵈᶜᵢ − pᵈᶜᵢ*)²
//! ```
//!
//! With dᵢ = 1/kᴰᵢ the droop cross terms cancel and V decreases along
//! unsaturated trajectories inside the security region; other choices of d
//! are admitted as diagnostics. Angle differences are taken in the
//! relative frame because the absolute angles drift with ω_syn.
//!
//! The Hessian of F_c is the cosine-weighted graph Laplacian: positive
//! semidefinite with a one-dimensional kernel spanned by the ones vector
//! for a connected graph inside the security region; its proper principal
//! minors are positive definite.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dynamics::{weighted_laplacian, Equilibrium, Sample, SimModel, SolveError, Trajectory};
use crate::par;

/// Security-region check: all line angle differences strictly inside ±π/2.
#[derive(Debug, Clone, Copy)]
pub struct SecurityReport {
    pub secure: bool,
    /// min over lines of (π/2 − |θᵢ−θⱼ|); negative when violated.
    pub worst_margin_rad: f64,
    pub worst_line: (usize, usize),
}

pub fn check_security(theta: &[f64], lines: &[(usize, usize, f64)]) -> SecurityReport {
    let mut worst_margin_rad = std::f64::consts::FRAC_PI_2;
    let mut worst_line = (0, 0);
    for &(i, j, _) in lines {
        let margin = std::f64::consts::FRAC_PI_2 - (theta[i] - theta[j]).abs();
        if margin < worst_margin_rad {
            worst_margin_rad = margin;
            worst_line = (i, j);
        }
    }
    SecurityReport {
        secure: worst_margin_rad > 0.0,
        worst_margin_rad,
        worst_line,
    }
}

/// Hessian of the network potential: the cosine-weighted Laplacian.
pub fn hessian_fc(theta: &[f64], lines: &[(usize, usize, f64)], n: usize) -> DMatrix<f64> {
    weighted_laplacian(n, lines, theta)
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_spectrum(matrix: &DMatrix<f64>) -> Vec<f64> {
    let eigen = SymmetricEigen::new(matrix.clone());
    let mut values: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
}

/// PSD with a one-dimensional kernel: smallest eigenvalue ≈ 0, second
/// strictly positive (both relative to the matrix scale).
pub fn is_psd_with_ones_kernel(matrix: &DMatrix<f64>, rel_tol: f64) -> bool {
    let spectrum = symmetric_spectrum(matrix);
    if spectrum.len() < 2 {
        return false;
    }
    let scale = spectrum.last().unwrap().abs().max(1.0);
    spectrum[0].abs() <= rel_tol * scale && spectrum[1] > rel_tol * scale
}

/// Every (n−1)-sized principal minor is positive definite; by interlacing
/// this covers all smaller principal minors too.
pub fn principal_minors_positive_definite(matrix: &DMatrix<f64>, rel_tol: f64) -> bool {
    let n = matrix.nrows();
    let scale = symmetric_spectrum(matrix).last().unwrap().abs().max(1.0);
    for drop in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != drop).collect();
        let mut minor = DMatrix::zeros(n - 1, n - 1);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                minor[(a, b)] = matrix[(i, j)];
            }
        }
        let spectrum = symmetric_spectrum(&minor);
        if spectrum[0] <= rel_tol * scale {
            return false;
        }
    }
    true
}

/// Weights and reference for the energy function.
#[derive(Debug, Clone)]
pub struct LyapunovConfig {
    /// dᵢ per LCC; the certified choice is 1/kᴰᵢ.
    pub d: Vec<f64>,
    pub reference: Equilibrium,
}

impl LyapunovConfig {
    /// The certificate weights dᵢ = 1/kᴰᵢ for the model's LCCs.
    pub fn certified(model: &SimModel, reference: Equilibrium) -> Result<Self, SolveError> {
        let d = model
            .lccs
            .iter()
            .map(|l| {
                if l.k_d > 0.0 {
                    Ok(1.0 / l.k_d)
                } else {
                    Err(SolveError::ZeroTotalDroop)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { d, reference })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LyapunovValue {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
}

fn potential_fc(theta: &[f64], lines: &[(usize, usize, f64)]) -> f64 {
    lines
        .iter()
        .map(|&(i, j, b)| b * (1.0 - (theta[i] - theta[j]).cos()))
        .sum()
}

fn potential_gradient(theta: &[f64], lines: &[(usize, usize, f64)], n: usize) -> Vec<f64> {
    let mut grad = vec![0.0; n];
    for &(i, j, b) in lines {
        let s = b * (theta[i] - theta[j]).sin();
        grad[i] += s;
        grad[j] -= s;
    }
    grad
}

/// Energy of one state against the reference equilibrium. Angle inputs are
/// absolute; both sides are shifted to the relative frame of `reference_bus`.
pub fn lyapunov_value(
    theta: &[f64],
    omega: &[f64],
    pdc: &[f64],
    model: &SimModel,
    config: &LyapunovConfig,
    reference_bus: usize,
) -> LyapunovValue {
    let n = model.n;
    let theta_rel: Vec<f64> = theta.iter().map(|t| t - theta[reference_bus]).collect();
    let theta_star = &config.reference.theta_rel_rad;
    // The stored equilibrium is already relative, but re-shift in case the
    // caller grounded it elsewhere.
    let shift = theta_star[reference_bus];
    let theta_star_rel: Vec<f64> = theta_star.iter().map(|t| t - shift).collect();

    let fc = potential_fc(&theta_rel, &model.lines);
    let fc_star = potential_fc(&theta_star_rel, &model.lines);
    let grad_star = potential_gradient(&theta_star_rel, &model.lines, n);
    let linear: f64 = (0..n)
        .map(|i| grad_star[i] * (theta_rel[i] - theta_star_rel[i]))
        .sum();

    let mut kinetic = 0.0;
    for g in &model.gens {
        let dw = omega[g.bus] - config.reference.omega_syn_pu;
        kinetic += 0.5 * g.inertia * dw * dw;
    }
    let v1 = fc - fc_star - linear + kinetic;

    let mut v2 = 0.0;
    for (idx, unit) in model.lccs.iter().enumerate() {
        if unit.blocked {
            continue;
        }
        let dp = pdc[idx] - config.reference.pdc_pu[idx];
        v2 += 0.5 * config.d[idx] * unit.t_d_s * dp * dp;
    }
    LyapunovValue { v: v1 + v2, v1, v2 }
}

/// Energy series along a trajectory slice with a central-difference V̇
/// estimate and the list of samples where V̇ exceeds the tolerance.
#[derive(Debug, Clone)]
pub struct DecreaseReport {
    /// (time, V, V̇ estimate); V̇ is NaN at the end points.
    pub series: Vec<(f64, f64, f64)>,
    /// Indices into `series` where V̇ > tolerance.
    pub violations: Vec<usize>,
    pub max_v: f64,
    pub tolerance: f64,
}

/// Evaluates V on every sample (in parallel when enabled) and estimates V̇
/// by central differences. The tolerance is 1e-8 · max V, scaled to the
/// trajectory's own magnitude.
pub fn lyapunov_decrease_report(
    samples: &[Sample],
    model: &SimModel,
    config: &LyapunovConfig,
    reference_bus: usize,
) -> DecreaseReport {
    let values: Vec<f64> = par::map(samples, |s| {
        lyapunov_value(
            &s.theta_rad,
            &s.omega_pu,
            &s.pdc_pu,
            model,
            config,
            reference_bus,
        )
        .v
    });
    decrease_from_values(samples, values)
}

/// Sequential variant of [`lyapunov_decrease_report`].
pub fn lyapunov_decrease_report_serial(
    samples: &[Sample],
    model: &SimModel,
    config: &LyapunovConfig,
    reference_bus: usize,
) -> DecreaseReport {
    let values: Vec<f64> = par::map_serial(samples, |s| {
        lyapunov_value(
            &s.theta_rad,
            &s.omega_pu,
            &s.pdc_pu,
            model,
            config,
            reference_bus,
        )
        .v
    });
    decrease_from_values(samples, values)
}

fn decrease_from_values(samples: &[Sample], values: Vec<f64>) -> DecreaseReport {
    let max_v = values.iter().fold(0.0f64, |m, v| m.max(*v));
    // Absolute floor so a constant-equilibrium trajectory (V ≡ 0 up to
    // machine noise) reports no violations.
    let tolerance = 1e-8 * max_v + 1e-12;
    let mut series = Vec::with_capacity(values.len());
    let mut violations = Vec::new();
    for (idx, (&v, sample)) in values.iter().zip(samples).enumerate() {
        let vdot = if idx == 0 || idx + 1 == values.len() {
            f64::NAN
        } else {
            let dt = samples[idx + 1].time_s - samples[idx - 1].time_s;
            (values[idx + 1] - values[idx - 1]) / dt
        };
        if vdot.is_finite() && vdot > tolerance {
            violations.push(idx);
        }
        series.push((sample.time_s, v, vdot));
    }
    DecreaseReport {
        series,
        violations,
        max_v,
        tolerance,
    }
}

/// Closed-form synchronous frequency (Σ Pᵢ + Σ Pᴰᵢ) / (Σ kᴳ + Σ kᴰ).
pub fn synchronous_frequency(
    imbalance_pu: f64,
    total_gen_droop: f64,
    total_lcc_droop: f64,
) -> Result<f64, SolveError> {
    let total = total_gen_droop + total_lcc_droop;
    if total <= 0.0 {
        return Err(SolveError::ZeroTotalDroop);
    }
    Ok(imbalance_pu / total)
}

/// Blocks of ∇²V: the angle block (cosine Laplacian), the kinetic block
/// diag(Mᵢ) and the DC block diag(dᵢ Tᵢᴰ).
pub fn hessian_blocks_positive(
    theta: &[f64],
    model: &SimModel,
    config: &LyapunovConfig,
    rel_tol: f64,
) -> (bool, bool, bool) {
    let h = hessian_fc(theta, &model.lines, model.n);
    let angle_ok =
        is_psd_with_ones_kernel(&h, rel_tol) && principal_minors_positive_definite(&h, rel_tol);
    let kinetic_ok = model.gens.iter().all(|g| g.inertia > 0.0);
    let dc_ok = model
        .lccs
        .iter()
        .enumerate()
        .filter(|(_, u)| !u.blocked)
        .all(|(i, u)| config.d[i] * u.t_d_s > 0.0);
    (angle_ok, kinetic_ok, dc_ok)
}

/// Maximum security margin over a trajectory slice.
pub fn trajectory_security(samples: &[Sample], trajectory: &Trajectory) -> SecurityReport {
    let mut worst = SecurityReport {
        secure: true,
        worst_margin_rad: std::f64::consts::FRAC_PI_2,
        worst_line: (0, 0),
    };
    for sample in samples {
        let report = check_security(&sample.theta_rad, &trajectory.lines);
        if report.worst_margin_rad < worst.worst_margin_rad {
            worst = report;
        }
    }
    worst
}


#[cfg(test)]
mod trajectory_tests {
    use super::*;
    use crate::dynamics::{simulate_model, steady_state, SimModel};
    use crate::grid::{bundled_fixture, load_system, Event, EventKind, Scenario};
    use crate::oefc::resolve_coefficients;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn three_bus_step_run() -> (SimModel, SimModel, crate::dynamics::Trajectory) {
        let spec = load_system(bundled_fixture("three_bus_minimal").unwrap()).unwrap();
        let coeff = resolve_coefficients(&spec.network, &spec.scenario.control).unwrap();
        let model = SimModel::build(&spec.network, &coeff, 0.0);
        let mut scenario: Scenario = spec.scenario.clone();
        scenario.events = vec![Event {
            time_s: 0.0,
            kind: EventKind::PowerStep {
                bus: 2,
                delta_pu: -1.0,
            },
        }];
        scenario.sim.horizon_s = 30.0;
        let post = model.after_events(&scenario.events).unwrap();
        let trajectory = simulate_model(model.clone(), &scenario).unwrap();
        assert!(trajectory.failure.is_none());
        (model, post, trajectory)
    }

    #[test]
    fn energy_is_zero_at_the_reference() {
        let (_, post, _) = three_bus_step_run();
        let eq = steady_state(&post).unwrap();
        let reference = post.reference_bus().unwrap();
        let config = LyapunovConfig::certified(&post, eq.clone()).unwrap();
        let omega = vec![eq.omega_syn_pu; post.n];
        let value = lyapunov_value(
            &eq.theta_rel_rad,
            &omega,
            &eq.pdc_pu,
            &post,
            &config,
            reference,
        );
        assert!(value.v.abs() < 1e-14);
        assert!(value.v1.abs() < 1e-14);
        assert_eq!(value.v2, 0.0);
    }

    #[test]
    fn kinetic_offset_gives_half_m_delta_squared() {
        let (_, post, _) = three_bus_step_run();
        let eq = steady_state(&post).unwrap();
        let reference = post.reference_bus().unwrap();
        let config = LyapunovConfig::certified(&post, eq.clone()).unwrap();
        let delta = 0.01;
        let mut omega = vec![eq.omega_syn_pu; post.n];
        for g in &post.gens {
            omega[g.bus] += delta;
        }
        let value = lyapunov_value(
            &eq.theta_rel_rad,
            &omega,
            &eq.pdc_pu,
            &post,
            &config,
            reference,
        );
        let expected: f64 = post
            .gens
            .iter()
            .map(|g| 0.5 * g.inertia * delta * delta)
            .sum();
        assert!((value.v - expected).abs() < 1e-14);
        assert!((value.v1 - expected).abs() < 1e-14);
    }

    #[test]
    fn bregman_term_positive_near_equilibrium() {
        let (_, post, _) = three_bus_step_run();
        let eq = steady_state(&post).unwrap();
        let reference = post.reference_bus().unwrap();
        let config = LyapunovConfig::certified(&post, eq.clone()).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let mut theta = eq.theta_rel_rad.clone();
            let mut omega = vec![eq.omega_syn_pu; post.n];
            let mut pdc = eq.pdc_pu.clone();
            for (i, t) in theta.iter_mut().enumerate() {
                if i != reference {
                    *t += rng.random_range(-0.3..0.3);
                }
            }
            for g in &post.gens {
                omega[g.bus] += rng.random_range(-0.05..0.05);
            }
            for p in &mut pdc {
                *p += rng.random_range(-0.3..0.3);
            }
            let security = check_security(&theta, &post.lines);
            if !security.secure {
                continue;
            }
            let same = theta == eq.theta_rel_rad
                && pdc == eq.pdc_pu
                && post.gens.iter().all(|g| omega[g.bus] == eq.omega_syn_pu);
            let value = lyapunov_value(&theta, &omega, &pdc, &post, &config, reference);
            if !same {
                assert!(value.v > 0.0, "V = {} not positive", value.v);
            }
        }
    }

    #[test]
    fn certified_weights_give_monotone_decrease() {
        let (_, post, trajectory) = three_bus_step_run();
        let eq = steady_state(&post).unwrap();
        let reference = post.reference_bus().unwrap();
        let config = LyapunovConfig::certified(&post, eq).unwrap();
        let samples = trajectory.samples_from(0.0);
        let report = lyapunov_decrease_report(samples, &post, &config, reference);
        assert!(report.max_v > 0.0);
        assert!(
            report.violations.is_empty(),
            "violations at {:?} (tol {})",
            &report.violations[..report.violations.len().min(5)],
            report.tolerance
        );
        // Energy decays to zero at the equilibrium.
        let terminal_v = report.series.last().unwrap().1;
        assert!(
            terminal_v < 1e-9 * report.max_v.max(1.0),
            "terminal V {terminal_v}"
        );
        // Parallel and serial paths agree exactly.
        let serial = lyapunov_decrease_report_serial(samples, &post, &config, reference);
        assert_eq!(report.violations, serial.violations);
        for (a, b) in report.series.iter().zip(&serial.series) {
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn adversarial_weights_are_diagnostic_not_an_error() {
        let (_, post, trajectory) = three_bus_step_run();
        let eq = steady_state(&post).unwrap();
        let reference = post.reference_bus().unwrap();
        let mut config = LyapunovConfig::certified(&post, eq).unwrap();
        for d in &mut config.d {
            *d *= 100.0;
        }
        let samples = trajectory.samples_from(0.0);
        let report = lyapunov_decrease_report(samples, &post, &config, reference);
        // The cross term no longer cancels; the report simply records it.
        assert_eq!(report.series.len(), samples.len());
    }

    #[test]
    fn hessian_blocks_positive_along_run() {
        let (_, post, trajectory) = three_bus_step_run();
        let eq = steady_state(&post).unwrap();
        let reference = post.reference_bus().unwrap();
        let config = LyapunovConfig::certified(&post, eq).unwrap();
        let _ = reference;
        let terminal = trajectory.terminal();
        let (angle_ok, kinetic_ok, dc_ok) =
            hessian_blocks_positive(&terminal.theta_rad, &post, &config, 1e-9);
        assert!(angle_ok && kinetic_ok && dc_ok);
        let security = trajectory_security(&trajectory.samples, &trajectory);
        assert!(security.secure);
    }
}
