//! Algebraic network equations: Newton angle solves and the
//! index-reduction frequency solve.
//!
//! Inside the security region Θ (|θᵢ−θⱼ| < π/2 on every line) the flow
//! Jacobian is a principal minor of the cosine-weighted graph Laplacian and
//! therefore positive definite, so the damped Newton iteration below is
//! reliable; divergence is classified as an infeasible flow when a line is
//! pinned at the Θ boundary.

use nalgebra::{DMatrix, DVector};

use super::model::{LccRegime, SimModel};
use super::SolveError;
use crate::grid::BusRole;

/// Newton controls for the algebraic angle solves.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Convergence threshold on the residual ∞-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Per-entry cap on the Newton step (rad).
    pub max_step_rad: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_step_rad: 0.5,
        }
    }
}

/// Net branch outflow Σⱼ Bᵢⱼ sin(θᵢ−θⱼ) per bus.
pub fn branch_outflow(n: usize, lines: &[(usize, usize, f64)], theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(i, j, b) in lines {
        let s = b * (theta[i] - theta[j]).sin();
        out[i] += s;
        out[j] -= s;
    }
    out
}

/// Cosine-weighted graph Laplacian L(θ); row sums are zero by construction.
pub fn weighted_laplacian(n: usize, lines: &[(usize, usize, f64)], theta: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, b) in lines {
        let w = b * (theta[i] - theta[j]).cos();
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

/// Residual of the algebraic equations over the model's algebraic buses
/// (ascending): Pᵢ + pᵈᶜᵢ − outflowᵢ at LCC buses, Pᵢ − outflowᵢ at passive
/// buses.
pub fn algebraic_residual(model: &SimModel, theta: &[f64], pdc: &[f64]) -> Vec<f64> {
    let q = model.net_injections(pdc);
    let outflow = branch_outflow(model.n, &model.lines, theta);
    model
        .algebraic_buses()
        .iter()
        .map(|&i| q[i] - outflow[i])
        .collect()
}

/// Degree-1 feasibility precheck: a free leaf bus can only pass |q| ≤ B.
fn leaf_precheck(
    n: usize,
    lines: &[(usize, usize, f64)],
    free: &[usize],
    q: &[f64],
) -> Result<(), SolveError> {
    let mut degree = vec![0usize; n];
    let mut single_line_b = vec![0.0f64; n];
    for &(i, j, b) in lines {
        degree[i] += 1;
        degree[j] += 1;
        single_line_b[i] = b;
        single_line_b[j] = b;
    }
    for &i in free {
        if degree[i] == 1 && q[i].abs() > single_line_b[i] {
            return Err(SolveError::InfeasibleFlow { bus: i });
        }
    }
    Ok(())
}

/// Solves qᵢ = Σⱼ Bᵢⱼ sin(θᵢ−θⱼ) for the angles of `free` buses, holding
/// the rest of `theta0` fixed. Warm-startable: pass the previous solution.
pub fn solve_flow(
    theta0: &[f64],
    free: &[usize],
    q: &[f64],
    lines: &[(usize, usize, f64)],
    n: usize,
    opts: &NewtonOptions,
) -> Result<Vec<f64>, SolveError> {
    if free.is_empty() {
        return Ok(theta0.to_vec());
    }
    leaf_precheck(n, lines, free, q)?;

    let mut theta = theta0.to_vec();
    let residual = |theta: &[f64]| -> DVector<f64> {
        let outflow = branch_outflow(n, lines, theta);
        DVector::from_iterator(free.len(), free.iter().map(|&i| q[i] - outflow[i]))
    };

    let mut r = residual(&theta);
    let mut r_norm = r.amax();
    for iter in 0..opts.max_iter {
        if r_norm <= opts.tol {
            return Ok(theta);
        }
        // dθ_free = L_ff⁻¹ r  (Jacobian of the residual is −L_ff).
        let l = weighted_laplacian(n, lines, &theta);
        let mut l_ff = DMatrix::zeros(free.len(), free.len());
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                l_ff[(a, b)] = l[(i, j)];
            }
        }
        let lu = l_ff.lu();
        let mut delta = lu.solve(&r).ok_or(SolveError::SingularJacobian)?;
        let max_component = delta.amax();
        if max_component > opts.max_step_rad {
            delta *= opts.max_step_rad / max_component;
        }

        // Backtracking on the residual ∞-norm.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let mut trial = theta.clone();
            for (a, &i) in free.iter().enumerate() {
                trial[i] += alpha * delta[a];
            }
            let trial_r = residual(&trial);
            let trial_norm = trial_r.amax();
            if trial_norm < r_norm {
                theta = trial;
                r = trial_r;
                r_norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(classify_failure(iter, r_norm, lines, &theta));
        }
    }
    if r_norm <= opts.tol {
        Ok(theta)
    } else {
        Err(classify_failure(opts.max_iter, r_norm, lines, &theta))
    }
}

fn classify_failure(
    iterations: usize,
    residual: f64,
    lines: &[(usize, usize, f64)],
    theta: &[f64],
) -> SolveError {
    for &(i, j, _) in lines {
        if (theta[i] - theta[j]).abs() >= std::f64::consts::FRAC_PI_2 * (1.0 - 1e-9) {
            return SolveError::InfeasibleFlow { bus: i };
        }
    }
    SolveError::NewtonDivergence {
        iterations,
        residual,
    }
}

/// Re-solves the algebraic angles (LCC and passive buses) of a model given
/// the DC powers, leaving generator angles fixed.
pub fn solve_algebraic(
    model: &SimModel,
    theta0: &[f64],
    pdc: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<f64>, SolveError> {
    let free = model.algebraic_buses();
    let q = model.net_injections(pdc);
    solve_flow(theta0, &free, &q, &model.lines, model.n, opts)
}

/// Index reduction with prescribed DC power rates: differentiates the
/// algebraic constraints in time and solves
/// `L_AA θ̇_A = ṗ − L_AG θ̇_G` for the angular rates of the algebraic
/// buses. Returns the full frequency vector (generator entries copied from
/// the input).
pub fn algebraic_frequencies(
    model: &SimModel,
    theta: &[f64],
    omega_gen: &[f64],
    pdc_rate: &[f64],
) -> Result<Vec<f64>, SolveError> {
    let regimes: Vec<LccRegime> = model
        .lccs
        .iter()
        .map(|_| LccRegime::Fixed { target_pu: 0.0 })
        .collect();
    let (omega, _) = frequency_solve(model, theta, omega_gen, None, Some(pdc_rate), &regimes)?;
    Ok(omega)
}

/// Index reduction with the droop feedback folded in: in the affine regime
/// `ṗᵢ = (−pᵢ + Pᴰᵢ − kᴰᵢ θ̇ᵢ)/Tᵢ` couples back into the constraint
/// derivative, adding kᴰ/T to the diagonal. Returns the full frequency
/// vector and the implied DC power rates.
pub(crate) fn coupled_frequencies(
    model: &SimModel,
    theta: &[f64],
    omega_gen: &[f64],
    pdc: &[f64],
    regimes: &[LccRegime],
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    frequency_solve(model, theta, omega_gen, Some(pdc), None, regimes)
}

fn frequency_solve(
    model: &SimModel,
    theta: &[f64],
    omega_gen: &[f64],
    pdc: Option<&[f64]>,
    pdc_rate: Option<&[f64]>,
    regimes: &[LccRegime],
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let alg = model.algebraic_buses();
    let n_alg = alg.len();
    if n_alg == 0 {
        return Ok((omega_gen.to_vec(), vec![0.0; model.lccs.len()]));
    }
    let l = weighted_laplacian(model.n, &model.lines, theta);

    let mut mat = DMatrix::zeros(n_alg, n_alg);
    for (a, &i) in alg.iter().enumerate() {
        for (b, &j) in alg.iter().enumerate() {
            mat[(a, b)] = l[(i, j)];
        }
    }
    // −L_AG θ̇_G: only generator columns contribute.
    let mut rhs = DVector::zeros(n_alg);
    for (a, &i) in alg.iter().enumerate() {
        let mut acc = 0.0;
        for g in &model.gens {
            acc -= l[(i, g.bus)] * omega_gen[g.bus];
        }
        rhs[a] = acc;
    }

    // DC-power rate contributions at LCC rows.
    for (idx, unit) in model.lccs.iter().enumerate() {
        if model.roles[unit.bus] != BusRole::LccConnected {
            continue;
        }
        let a = alg
            .iter()
            .position(|&i| i == unit.bus)
            .expect("LCC bus is algebraic");
        match (pdc_rate, pdc) {
            (Some(rates), _) => {
                rhs[a] += rates[idx];
            }
            (None, Some(p)) => match regimes[idx] {
                LccRegime::Affine => {
                    mat[(a, a)] += unit.k_d / unit.t_d_s;
                    rhs[a] += (-p[idx] + unit.p_nominal_pu) / unit.t_d_s;
                }
                LccRegime::Fixed { target_pu } => {
                    if !unit.blocked {
                        rhs[a] += (-p[idx] + target_pu) / unit.t_d_s;
                    }
                }
            },
            (None, None) => unreachable!("one of pdc or pdc_rate is provided"),
        }
    }

    let lu = mat.lu();
    let w = lu.solve(&rhs).ok_or(SolveError::SingularJacobian)?;

    let mut omega = omega_gen.to_vec();
    for (a, &i) in alg.iter().enumerate() {
        omega[i] = w[a];
    }
    // Implied DC rates at the solved frequencies.
    let mut rates = vec![0.0; model.lccs.len()];
    if let Some(p) = pdc {
        for (idx, unit) in model.lccs.iter().enumerate() {
            rates[idx] = match regimes[idx] {
                LccRegime::Affine => {
                    (-p[idx] + unit.p_nominal_pu - unit.k_d * omega[unit.bus]) / unit.t_d_s
                }
                LccRegime::Fixed { target_pu } => {
                    if unit.blocked {
                        0.0
                    } else {
                        (-p[idx] + target_pu) / unit.t_d_s
                    }
                }
            };
        }
    } else if let Some(r) = pdc_rate {
        rates.copy_from_slice(r);
    }
    Ok((omega, rates))
}
