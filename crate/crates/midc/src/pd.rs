//! Partial primal-dual iteration for the distributed allocation problem,
//! and its equivalence with the closed-loop dynamics.
//!
//! Per-bus dual variables λ follow gradient ascent at generator buses and
//! algebraic stationarity at LCC and passive buses; per-edge multipliers ν
//! follow gradient descent on the consensus constraint:
//!
//! ```text
//!   λ̇ᵢ = τᵢ (−kᴳᵢ λᵢ + Pᵢ + Σⱼ νᵢⱼ)          i generator
//!   0  = Pᵢ + Pᴰᵢ − kᴰᵢ λᵢ + Σⱼ νᵢⱼ           i LCC bus
//!   0  = Pᵢ + Σⱼ νᵢⱼ                           i passive
//!   ν̇ᵢⱼ = −γᵢⱼ (λᵢ − λⱼ)
//! ```
//!
//! Identifying λ with the bus frequency deviation, ν with the line flow
//! −B sin(θᵢ−θⱼ), τ = 1/M and γ = B cos(θᵢ−θⱼ) makes these the reduced
//! (Tᴰ = 0) closed-loop equations, so the grid itself runs the optimizer.
//! The LCC stationarity uses the unprojected minimizer −kᴰλ; regulation
//! boxes are assumed non-binding, and equivalence claims exclude
//! saturation.
//!
//! ν is stored once per line, oriented from→to; the reverse orientation is
//! the negation, so antisymmetry holds structurally.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{simulate_reduced, Sample, SimModel, SolveError};
use crate::grid::BusRole;

/// Stepsize/weight mode for the ν updates.
#[derive(Debug, Clone)]
pub enum GammaMode {
    /// Fixed per-line weights (standalone optimizer: susceptances at the
    /// flat start).
    Frozen(Vec<f64>),
    /// State-dependent weights √(B² − ν²), the identification's
    /// B cos(θᵢ−θⱼ) recovered from ν inside the security region.
    FromNu,
}

/// The iteration's static data.
#[derive(Debug, Clone)]
pub struct PdSystem {
    pub n: usize,
    pub roles: Vec<BusRole>,
    /// (from, to, effective susceptance).
    pub lines: Vec<(usize, usize, f64)>,
    pub injection: Vec<f64>,
    /// (bus, kᴳ, τ) per generator.
    pub gens: Vec<(usize, f64, f64)>,
    /// (bus, kᴰ, Pᴰ) per LCC.
    pub lccs: Vec<(usize, f64, f64)>,
    pub gamma: GammaMode,
}

/// Dual iterate: λ per bus (algebraic entries filled by the last solve),
/// ν per oriented line.
#[derive(Debug, Clone)]
pub struct PdState {
    pub time_s: f64,
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
}

/// (dλ by bus index, dν per line, filled λ).
type PdDerivatives = (Vec<f64>, Vec<f64>, Vec<f64>);

impl PdSystem {
    /// Builds the iteration data from a simulation model, with stepsizes
    /// from the identification (τ = 1/M).
    pub fn from_model(model: &SimModel, gamma: GammaMode) -> Result<Self, SolveError> {
        for unit in &model.lccs {
            if unit.blocked || unit.k_d <= 0.0 {
                return Err(SolveError::InvalidEvent(
                    "primal-dual form needs every LCC active with positive droop".into(),
                ));
            }
        }
        Ok(Self {
            n: model.n,
            roles: model.roles.clone(),
            lines: model.lines.clone(),
            injection: model.injection_pu.clone(),
            gens: model
                .gens
                .iter()
                .map(|g| (g.bus, g.k_eff, 1.0 / g.inertia))
                .collect(),
            lccs: model
                .lccs
                .iter()
                .map(|l| (l.bus, l.k_d, l.p_nominal_pu))
                .collect(),
            gamma,
        })
    }

    fn passive_buses(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.roles[i] == BusRole::Passive)
            .collect()
    }

    /// Net multiplier inflow Σⱼ νᵢⱼ per bus.
    fn nu_divergence(&self, nu: &[f64]) -> Vec<f64> {
        let mut div = vec![0.0; self.n];
        for (l, &(i, j, _)) in self.lines.iter().enumerate() {
            div[i] += nu[l];
            div[j] -= nu[l];
        }
        div
    }

    fn gamma_weights(&self, nu: &[f64]) -> Result<Vec<f64>, SolveError> {
        match &self.gamma {
            GammaMode::Frozen(w) => Ok(w.clone()),
            GammaMode::FromNu => self
                .lines
                .iter()
                .zip(nu)
                .map(|(&(_, _, b), &v)| {
                    let rest = b * b - v * v;
                    if rest <= 0.0 {
                        Err(SolveError::SingularJacobian)
                    } else {
                        Ok(rest.sqrt())
                    }
                })
                .collect(),
        }
    }

    /// Fills the algebraic λ entries: direct at LCC buses, a weighted
    /// Laplacian solve at passive buses (the differentiated consensus
    /// constraints).
    fn solve_lambda(
        &self,
        lambda_gen: &[f64],
        nu: &[f64],
        gamma: &[f64],
    ) -> Result<Vec<f64>, SolveError> {
        let div = self.nu_divergence(nu);
        let mut lambda = vec![0.0; self.n];
        for &(bus, _, _) in &self.gens {
            lambda[bus] = lambda_gen[bus];
        }
        for &(bus, k_d, p_nom) in &self.lccs {
            lambda[bus] = (self.injection[bus] + p_nom + div[bus]) / k_d;
        }
        let passive = self.passive_buses();
        if !passive.is_empty() {
            let np = passive.len();
            let mut l = DMatrix::zeros(self.n, self.n);
            for (idx, &(i, j, _)) in self.lines.iter().enumerate() {
                let w = gamma[idx];
                l[(i, i)] += w;
                l[(j, j)] += w;
                l[(i, j)] -= w;
                l[(j, i)] -= w;
            }
            let mut mat = DMatrix::zeros(np, np);
            let mut rhs = DVector::zeros(np);
            for (a, &i) in passive.iter().enumerate() {
                for (b, &j) in passive.iter().enumerate() {
                    mat[(a, b)] = l[(i, j)];
                }
                let mut acc = 0.0;
                for j in 0..self.n {
                    if self.roles[j] != BusRole::Passive {
                        acc -= l[(i, j)] * lambda[j];
                    }
                }
                rhs[a] = acc;
            }
            let w = mat.lu().solve(&rhs).ok_or(SolveError::SingularJacobian)?;
            for (a, &i) in passive.iter().enumerate() {
                lambda[i] = w[a];
            }
        }
        Ok(lambda)
    }

    /// One derivative evaluation; returns (dλ at generator buses by bus
    /// index, dν per line, filled λ).
    fn eval(&self, lambda_gen: &[f64], nu: &[f64]) -> Result<PdDerivatives, SolveError> {
        let gamma = self.gamma_weights(nu)?;
        let lambda = self.solve_lambda(lambda_gen, nu, &gamma)?;
        let div = self.nu_divergence(nu);
        let mut dlam = vec![0.0; self.n];
        for &(bus, k_g, tau) in &self.gens {
            dlam[bus] = tau * (-k_g * lambda[bus] + self.injection[bus] + div[bus]);
        }
        let dnu = self
            .lines
            .iter()
            .zip(&gamma)
            .map(|(&(i, j, _), &g)| -g * (lambda[i] - lambda[j]))
            .collect();
        Ok((dlam, dnu, lambda))
    }
}

/// One RK4 step of size `h`; the returned state carries consistent
/// algebraic λ entries.
pub fn pd_step(sys: &PdSystem, state: &PdState, h: f64) -> Result<PdState, SolveError> {
    let rk = |lam: &[f64], nu: &[f64]| sys.eval(lam, nu);

    let (dl1, dn1, _) = rk(&state.lambda, &state.nu)?;
    let (l2, n2) = advance(&state.lambda, &state.nu, &dl1, &dn1, h / 2.0);
    let (dl2, dn2, _) = rk(&l2, &n2)?;
    let (l3, n3) = advance(&state.lambda, &state.nu, &dl2, &dn2, h / 2.0);
    let (dl3, dn3, _) = rk(&l3, &n3)?;
    let (l4, n4) = advance(&state.lambda, &state.nu, &dl3, &dn3, h);
    let (dl4, dn4, _) = rk(&l4, &n4)?;

    let mut lambda = state.lambda.clone();
    let mut nu = state.nu.clone();
    for i in 0..lambda.len() {
        lambda[i] += h / 6.0 * (dl1[i] + 2.0 * dl2[i] + 2.0 * dl3[i] + dl4[i]);
    }
    for l in 0..nu.len() {
        nu[l] += h / 6.0 * (dn1[l] + 2.0 * dn2[l] + 2.0 * dn3[l] + dn4[l]);
    }
    // Re-fill algebraic λ at the new differential state.
    let gamma = sys.gamma_weights(&nu)?;
    let lambda = sys.solve_lambda(&lambda, &nu, &gamma)?;
    Ok(PdState {
        time_s: state.time_s + h,
        lambda,
        nu,
    })
}

fn advance(lam: &[f64], nu: &[f64], dlam: &[f64], dnu: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let l = lam
        .iter()
        .zip(dlam)
        .map(|(x, d)| x + h * d)
        .collect::<Vec<_>>();
    let n = nu
        .iter()
        .zip(dnu)
        .map(|(x, d)| x + h * d)
        .collect::<Vec<_>>();
    (l, n)
}

/// Balanced multiplier initialization: a susceptance-weighted DC flow whose
/// divergence satisfies the passive-bus constraints, with the total
/// imbalance assigned to the generator buses.
pub fn initial_nu(sys: &PdSystem) -> Result<Vec<f64>, SolveError> {
    let mut q = sys.injection.clone();
    for &(bus, _, p_nom) in &sys.lccs {
        q[bus] += p_nom;
    }
    let total: f64 = q.iter().sum();
    let ng = sys.gens.len() as f64;
    for &(bus, _, _) in &sys.gens {
        q[bus] -= total / ng;
    }
    // Ground one bus and solve L_B φ = q on the rest.
    let mut l = DMatrix::zeros(sys.n, sys.n);
    for &(i, j, b) in &sys.lines {
        l[(i, i)] += b;
        l[(j, j)] += b;
        l[(i, j)] -= b;
        l[(j, i)] -= b;
    }
    let m = sys.n - 1;
    let mut mat = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for a in 0..m {
        for b in 0..m {
            mat[(a, b)] = l[(a + 1, b + 1)];
        }
        rhs[a] = q[a + 1];
    }
    let phi_rest = mat.lu().solve(&rhs).ok_or(SolveError::SingularJacobian)?;
    let mut phi = vec![0.0; sys.n];
    for a in 0..m {
        phi[a + 1] = phi_rest[a];
    }
    Ok(sys
        .lines
        .iter()
        .map(|&(i, j, b)| -b * (phi[i] - phi[j]))
        .collect())
}

/// Integrates the iteration until both derivative norms drop below `tol`.
pub fn run_pd(
    sys: &PdSystem,
    init: PdState,
    tol: f64,
    h: f64,
    max_time_s: f64,
) -> Result<PdState, SolveError> {
    let mut state = init;
    let max_steps = (max_time_s / h).round() as usize;
    for _ in 0..max_steps {
        let (dlam, dnu, _) = sys.eval(&state.lambda, &state.nu)?;
        let dl_max = dlam.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let dn_max = dnu.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if dl_max <= tol && dn_max <= tol {
            return Ok(state);
        }
        state = pd_step(sys, &state, h)?;
    }
    Err(SolveError::NoConvergence)
}

/// Views a dynamics sample as a dual iterate: λ := ω, ν := line flows.
pub fn map_dynamics_to_pd(sample: &Sample) -> PdState {
    PdState {
        time_s: sample.time_s,
        lambda: sample.omega_pu.clone(),
        nu: sample.flow_pu.clone(),
    }
}

/// The identification's state-dependent edge stepsizes γ = B cos(θᵢ−θⱼ)
/// for one sample.
pub fn mapped_gamma(sample: &Sample, lines: &[(usize, usize, f64)]) -> Vec<f64> {
    lines
        .iter()
        .map(|&(i, j, b)| b * (sample.theta_rad[i] - sample.theta_rad[j]).cos())
        .collect()
}

/// Pointwise comparison of the mapped dynamics and the pd iteration.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub max_lambda_err: f64,
    pub max_nu_err: f64,
    /// Discretization-error estimate of the physical run (dt vs dt/2
    /// Richardson difference, floored at the Newton tolerance).
    pub integration_tolerance: f64,
    /// Acceptance threshold, 10 × the integration tolerance.
    pub threshold: f64,
    pub pass: bool,
}

/// Runs the reduced (Tᴰ = 0) closed loop and the pd iteration from the
/// same initial condition with the same integrator and step, and compares
/// (ω, flows) against (λ, ν) over the horizon.
pub fn verify_equivalence(
    model: &SimModel,
    theta0: &[f64],
    horizon_s: f64,
    dt_s: f64,
    output_every_s: f64,
) -> Result<EquivalenceReport, SolveError> {
    let omega0 = vec![0.0; model.n];
    let physical = simulate_reduced(model, theta0, &omega0, horizon_s, dt_s, output_every_s)?;
    let physical_half = simulate_reduced(
        model,
        theta0,
        &omega0,
        horizon_s,
        dt_s / 2.0,
        output_every_s,
    )?;

    let sys = PdSystem::from_model(model, GammaMode::FromNu)?;
    let first = &physical.samples[0];
    let mut pd_state = PdState {
        time_s: first.time_s,
        lambda: first.omega_pu.clone(),
        nu: first.flow_pu.clone(),
    };

    let steps_per_sample = ((output_every_s / dt_s).round() as usize).max(1);
    let n_steps = (horizon_s / dt_s).round() as usize;
    let mut max_lambda_err = 0.0f64;
    let mut max_nu_err = 0.0f64;
    let mut sample_idx = 0usize;
    for k in 0..n_steps {
        pd_state = pd_step(&sys, &pd_state, dt_s)?;
        if (k + 1) % steps_per_sample == 0 {
            sample_idx += 1;
            let reference = &physical.samples[sample_idx];
            for i in 0..model.n {
                max_lambda_err =
                    max_lambda_err.max((pd_state.lambda[i] - reference.omega_pu[i]).abs());
            }
            for l in 0..model.lines.len() {
                max_nu_err = max_nu_err.max((pd_state.nu[l] - reference.flow_pu[l]).abs());
            }
        }
    }

    let mut richardson = 0.0f64;
    for (a, b) in physical.samples.iter().zip(&physical_half.samples) {
        for i in 0..model.n {
            richardson = richardson.max((a.omega_pu[i] - b.omega_pu[i]).abs());
        }
        for l in 0..model.lines.len() {
            richardson = richardson.max((a.flow_pu[l] - b.flow_pu[l]).abs());
        }
    }
    let integration_tolerance = richardson.max(1e-10);
    let threshold = 10.0 * integration_tolerance;
    Ok(EquivalenceReport {
        max_lambda_err,
        max_nu_err,
        integration_tolerance,
        threshold,
        pass: max_lambda_err <= threshold && max_nu_err <= threshold,
    })
}

/// Convenience for equivalence tests: the flow state of the pre-event
/// system, which the post-event model then relaxes from.
pub fn pre_event_angles(model_pre: &SimModel) -> Result<Vec<f64>, SolveError> {
    let state = crate::dynamics::initial_state(model_pre)?;
    Ok(state.theta_rad)
}
