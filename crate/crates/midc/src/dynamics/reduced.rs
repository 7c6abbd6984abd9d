//! Instantaneous-LCC variant: with Tᴰ → 0 the DC power tracks its order
//! exactly and the LCC bus equation becomes an explicit angle dynamic,
//!
//! ```text
//!   kᴰᵢ θ̇ᵢ = Pᵢ + Pᴰᵢ − Σⱼ Bᵢⱼ sin(θᵢ−θⱼ),   i LCC bus,
//! ```
//!
//! leaving only passive angles algebraic. This is the regime in which the
//! closed loop coincides with the partial primal-dual iteration, so this
//! integrator mirrors the main one stage for stage (same RK4 tableau, same
//! Newton controls) to make trajectory comparisons meaningful. Dead zone,
//! saturation and events are outside this regime and are not applied.

use nalgebra::{DMatrix, DVector};

use super::algebraic::{branch_outflow, solve_flow, weighted_laplacian, NewtonOptions};
use super::model::SimModel;
use super::trajectory::{Sample, Trajectory};
use super::SolveError;
use crate::grid::BusRole;

struct ReducedEval {
    dx: DVector<f64>,
    omega: Vec<f64>,
}

fn eval(
    model: &SimModel,
    x: &DVector<f64>,
    warm_theta: &mut [f64],
    passive: &[usize],
    opts: &NewtonOptions,
) -> Result<ReducedEval, SolveError> {
    let ng = model.gens.len();
    let nd = model.lccs.len();
    for (a, g) in model.gens.iter().enumerate() {
        warm_theta[g.bus] = x[a];
    }
    for (a, unit) in model.lccs.iter().enumerate() {
        warm_theta[unit.bus] = x[2 * ng + a];
    }
    let theta = solve_flow(
        warm_theta,
        passive,
        &model.injection_pu,
        &model.lines,
        model.n,
        opts,
    )?;
    warm_theta.copy_from_slice(&theta);

    let outflow = branch_outflow(model.n, &model.lines, &theta);
    let mut dx = DVector::zeros(2 * ng + nd);
    let mut omega = vec![0.0; model.n];
    for (a, g) in model.gens.iter().enumerate() {
        let w = x[ng + a];
        omega[g.bus] = w;
        dx[a] = w;
        dx[ng + a] = (model.injection_pu[g.bus] - outflow[g.bus] - g.k_eff * w) / g.inertia;
    }
    for (a, unit) in model.lccs.iter().enumerate() {
        let w = (model.injection_pu[unit.bus] + unit.p_nominal_pu - outflow[unit.bus]) / unit.k_d;
        omega[unit.bus] = w;
        dx[2 * ng + a] = w;
    }

    // Passive frequencies from the differentiated constraints.
    if !passive.is_empty() {
        let l = weighted_laplacian(model.n, &model.lines, &theta);
        let np = passive.len();
        let mut mat = DMatrix::zeros(np, np);
        let mut rhs = DVector::zeros(np);
        for (a, &i) in passive.iter().enumerate() {
            for (b, &j) in passive.iter().enumerate() {
                mat[(a, b)] = l[(i, j)];
            }
            let mut acc = 0.0;
            for j in 0..model.n {
                if model.roles[j] != BusRole::Passive {
                    acc -= l[(i, j)] * omega[j];
                }
            }
            rhs[a] = acc;
        }
        let w = mat.lu().solve(&rhs).ok_or(SolveError::SingularJacobian)?;
        for (a, &i) in passive.iter().enumerate() {
            omega[i] = w[a];
        }
    }
    Ok(ReducedEval { dx, omega })
}

/// Integrates the reduced system from an explicit initial condition.
/// `theta0` is the full angle vector; `omega0` supplies the generator
/// entries.
pub fn simulate_reduced(
    model: &SimModel,
    theta0: &[f64],
    omega0: &[f64],
    horizon_s: f64,
    dt_s: f64,
    output_every_s: f64,
) -> Result<Trajectory, SolveError> {
    for unit in &model.lccs {
        if unit.blocked || unit.k_d <= 0.0 {
            return Err(SolveError::InvalidEvent(
                "reduced mode needs every LCC active with positive droop".into(),
            ));
        }
    }
    let ng = model.gens.len();
    let nd = model.lccs.len();
    let passive: Vec<usize> = (0..model.n)
        .filter(|&i| model.roles[i] == BusRole::Passive)
        .collect();
    let opts = NewtonOptions::default();

    let mut x = DVector::zeros(2 * ng + nd);
    for (a, g) in model.gens.iter().enumerate() {
        x[a] = theta0[g.bus];
        x[ng + a] = omega0[g.bus];
    }
    for (a, unit) in model.lccs.iter().enumerate() {
        x[2 * ng + a] = theta0[unit.bus];
    }

    let mut warm = theta0.to_vec();
    let mut trajectory = Trajectory::new(model, dt_s, output_every_s);
    let n_steps = (horizon_s / dt_s).round() as usize;
    let steps_per_sample = ((output_every_s / dt_s).round() as usize).max(1);

    let record = |trajectory: &mut Trajectory,
                  model: &SimModel,
                  time_s: f64,
                  theta: &[f64],
                  omega: &[f64],
                  outflow: &[f64]| {
        let pdc_pu = model
            .lccs
            .iter()
            .map(|u| outflow[u.bus] - model.injection_pu[u.bus])
            .collect();
        let flow_pu = trajectory
            .lines
            .iter()
            .map(|&(i, j, b)| -b * (theta[i] - theta[j]).sin())
            .collect();
        let u_gen_pu = model.gens.iter().map(|g| -g.k_eff * omega[g.bus]).collect();
        let sample = Sample {
            time_s,
            omega_pu: omega.to_vec(),
            theta_rad: theta.to_vec(),
            pdc_pu,
            saturated: vec![false; model.lccs.len()],
            u_gen_pu,
            flow_pu,
        };
        trajectory.samples.push(sample);
    };

    let first = eval(model, &x, &mut warm, &passive, &opts)?;
    let outflow = branch_outflow(model.n, &model.lines, &warm);
    record(
        &mut trajectory,
        model,
        0.0,
        &warm.clone(),
        &first.omega,
        &outflow,
    );

    for k in 0..n_steps {
        let k1 = eval(model, &x, &mut warm, &passive, &opts)?;
        let k2 = eval(
            model,
            &(&x + &k1.dx * (dt_s / 2.0)),
            &mut warm,
            &passive,
            &opts,
        )?;
        let k3 = eval(
            model,
            &(&x + &k2.dx * (dt_s / 2.0)),
            &mut warm,
            &passive,
            &opts,
        )?;
        let k4 = eval(model, &(&x + &k3.dx * dt_s), &mut warm, &passive, &opts)?;
        x += (k1.dx + k2.dx * 2.0 + k3.dx * 2.0 + k4.dx) * (dt_s / 6.0);

        if (k + 1) % steps_per_sample == 0 {
            let time_s = (k + 1) as f64 * dt_s;
            let fin = eval(model, &x, &mut warm, &passive, &opts)?;
            let outflow = branch_outflow(model.n, &model.lines, &warm);
            record(
                &mut trajectory,
                model,
                time_s,
                &warm.clone(),
                &fin.omega,
                &outflow,
            );
        }
    }
    Ok(trajectory)
}
