//! Droop-aware steady states.
//!
//! At equilibrium every bus shares one frequency deviation ω_syn. Summing
//! the bus equations eliminates the network and gives the closed form
//!
//! ```text
//!   ω_syn = (Σ Pᵢ + Σ Pᴰᵢ) / (Σ kᴳᵢ + Σ kᴰᵢ)
//! ```
//!
//! when no link saturates. Saturated links inject their bound instead of
//! following the droop line, which is resolved by a fixed point over the
//! active set before the angles are solved.

use super::algebraic::{solve_flow, NewtonOptions};
use super::model::SimModel;
use super::{Equilibrium, SolveError};

/// Unsaturated closed-form synchronous frequency of the model.
pub fn synchronous_frequency_of_model(model: &SimModel) -> Result<f64, SolveError> {
    let total = model.total_droop();
    if total <= 0.0 {
        return Err(SolveError::ZeroTotalDroop);
    }
    Ok(model.imbalance_pu() / total)
}

/// Computes the equilibrium of the (post-event) model: ω_syn with
/// saturation handled by an active-set fixed point, steady DC powers, and
/// the relative angle solution.
pub fn steady_state(model: &SimModel) -> Result<Equilibrium, SolveError> {
    let nd = model.lccs.len();
    let mut bound: Vec<Option<f64>> = vec![None; nd];
    let mut omega_syn = 0.0;
    let max_iter = 2 * nd + 4;
    let mut settled = false;

    for _ in 0..max_iter {
        let mut sum_k: f64 = model.gens.iter().map(|g| g.k_eff).sum();
        let mut num: f64 = model.injection_pu.iter().sum();
        for (i, unit) in model.lccs.iter().enumerate() {
            if unit.blocked {
                continue;
            }
            match bound[i] {
                Some(pb) => num += pb,
                None => {
                    num += unit.p_nominal_pu;
                    sum_k += unit.k_d;
                }
            }
        }
        if sum_k <= 0.0 {
            return Err(SolveError::ZeroTotalDroop);
        }
        omega_syn = num / sum_k;

        let next: Vec<Option<f64>> = model
            .lccs
            .iter()
            .map(|unit| {
                if unit.blocked {
                    return None;
                }
                let p = unit.p_nominal_pu - unit.k_d * omega_syn;
                if p > unit.p_max_pu {
                    Some(unit.p_max_pu)
                } else if p < unit.p_min_pu {
                    Some(unit.p_min_pu)
                } else {
                    None
                }
            })
            .collect();
        if next == bound {
            settled = true;
            break;
        }
        bound = next;
    }
    if !settled {
        return Err(SolveError::ActiveSetCycle);
    }

    let pdc_pu: Vec<f64> = model
        .lccs
        .iter()
        .zip(&bound)
        .map(|(unit, b)| {
            if unit.blocked {
                0.0
            } else {
                b.unwrap_or(unit.p_nominal_pu - unit.k_d * omega_syn)
            }
        })
        .collect();

    // Steady flow: generators inject P − kω, the rest their net injection.
    let reference = model.reference_bus()?;
    let mut q = model.net_injections(&pdc_pu);
    for g in &model.gens {
        q[g.bus] -= g.k_eff * omega_syn;
    }
    let free: Vec<usize> = (0..model.n).filter(|&i| i != reference).collect();
    let theta_rel_rad = solve_flow(
        &vec![0.0; model.n],
        &free,
        &q,
        &model.lines,
        model.n,
        &NewtonOptions::default(),
    )
    .map_err(|e| match e {
        SolveError::NewtonDivergence { .. } | SolveError::InfeasibleFlow { .. } => {
            SolveError::NoSecureSolution
        }
        other => other,
    })?;

    let u_gen_pu = model
        .gens
        .iter()
        .map(|g| (g.bus, -g.k_eff * omega_syn))
        .collect();
    let u_lcc_pu = model
        .lccs
        .iter()
        .zip(&pdc_pu)
        .filter(|(u, _)| !u.blocked)
        .map(|(u, &p)| (u.bus, p - u.p_nominal_pu))
        .collect();
    let saturated = bound.iter().map(|b| b.is_some()).collect();

    Ok(Equilibrium {
        theta_rel_rad,
        omega_syn_pu: omega_syn,
        pdc_pu,
        u_gen_pu,
        u_lcc_pu,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bundled_fixture, load_system};
    use crate::oefc::resolve_coefficients;
    use approx::assert_relative_eq;

    fn three_bus_model() -> SimModel {
        let spec = load_system(bundled_fixture("three_bus_minimal").unwrap()).unwrap();
        let coeff = resolve_coefficients(&spec.network, &spec.scenario.control).unwrap();
        SimModel::build(&spec.network, &coeff, 0.0)
    }

    #[test]
    fn balanced_system_has_zero_frequency() {
        let model = three_bus_model();
        assert_relative_eq!(
            synchronous_frequency_of_model(&model).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        let eq = steady_state(&model).unwrap();
        assert_relative_eq!(eq.omega_syn_pu, 0.0, epsilon = 1e-14);
        assert_relative_eq!(eq.pdc_pu[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn single_generator_scalar_balance() {
        let mut model = three_bus_model();
        // Remove the LCC's droop so only the generator responds.
        model.lccs[0].k_d = 0.0;
        model.injection_pu[2] -= 1.0;
        let omega = synchronous_frequency_of_model(&model).unwrap();
        assert_relative_eq!(omega, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn imbalance_splits_by_droop() {
        let mut model = three_bus_model();
        model.injection_pu[2] -= 1.0;
        // k_G = 10, k_D = 1.5²/(2·0.05) = 22.5.
        let omega = synchronous_frequency_of_model(&model).unwrap();
        assert_relative_eq!(omega, -1.0 / 32.5, epsilon = 1e-12);
        let eq = steady_state(&model).unwrap();
        assert_relative_eq!(eq.omega_syn_pu, omega, epsilon = 1e-12);
        // Steady power balance: Σ P + Σ pᵈᶜ* − Σ kᴳ ω = 0.
        let p_total: f64 = model.injection_pu.iter().sum::<f64>() + eq.pdc_pu[0];
        assert!((p_total - 10.0 * omega).abs() < 1e-9);
        assert!(!eq.saturated[0]);
    }

    #[test]
    fn saturation_pins_dc_power_at_bound() {
        let mut model = three_bus_model();
        // Huge load loss forces the link against its lower bound (4.0).
        model.injection_pu[2] += 4.0;
        let eq = steady_state(&model).unwrap();
        assert!(eq.saturated[0]);
        assert_relative_eq!(eq.pdc_pu[0], 4.0, epsilon = 1e-12);
        // Remaining imbalance is carried by the generator alone:
        // ω = (ΣP + p_bound)/kᴳ = (-6.5+4.0+1.5+4.0)/10.
        assert_relative_eq!(eq.omega_syn_pu, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn doubling_droop_halves_frequency_deviation() {
        let mut model = three_bus_model();
        model.injection_pu[2] -= 1.0;
        let omega1 = synchronous_frequency_of_model(&model).unwrap();
        model.gens[0].k_eff *= 2.0;
        model.lccs[0].k_d *= 2.0;
        let omega2 = synchronous_frequency_of_model(&model).unwrap();
        assert_relative_eq!(omega2, omega1 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_total_droop_is_an_error() {
        let mut model = three_bus_model();
        model.gens[0].k_eff = 0.0;
        model.lccs[0].k_d = 0.0;
        assert!(matches!(
            synchronous_frequency_of_model(&model),
            Err(SolveError::ZeroTotalDroop)
        ));
    }
}
