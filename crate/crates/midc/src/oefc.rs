//! Emergency power-imbalance allocation: cost model, closed-form optimal
//! droop coefficients, and an independent dual-bisection oracle.
//!
//! The allocation problem minimizes the sum of quadratic regulation costs,
//!
//! ```text
//!   min  Σ_G ½ βᵢ (uᴳᵢ)²  +  Σ_D cᵢ (uᴰᵢ)²
//!   s.t. Σ uᴳ + Σ uᴰ + b = 0,   uᴰᵢ within its regulation box,
//! ```
//!
//! where `b` is the total system imbalance and `cᵢ` is `α/Z²` under the
//! regulation-margin objective or `e/(Kᶠ)²` under the adjacent-frequency
//! objective. The closed-form optimal droop coefficients are `kᴳ = 1/β` and
//! `kᴰ = 1/(2c)`; the oracle solves the same problem by scalar bisection on
//! the dual variable and is kept independent of those formulas so the two
//! routes can check each other.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::grid::{ControlConfig, DroopSelection, MarginDirection, Network, Objective};
use crate::par;

#[derive(Debug, Error, PartialEq)]
pub enum OefcError {
    #[error("LCC at bus {bus}: parameter `{field}` required by the selected objective is missing")]
    MissingParameter { bus: usize, field: &'static str },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("balance constraint cannot be met within the regulation boxes")]
    Infeasible,
}

/// Quadratic generator regulation cost `½ β u²`.
pub fn cost_generator(u_pu: f64, beta: f64) -> f64 {
    0.5 * beta * u_pu * u_pu
}

/// Power regulation margin of an LCC link: distance from nominal to the
/// bound in the direction the regulation must move.
pub fn regulation_margin(
    nominal_pu: f64,
    max_pu: f64,
    min_pu: f64,
    direction: MarginDirection,
) -> f64 {
    match direction {
        MarginDirection::Increase => max_pu - nominal_pu,
        MarginDirection::Decrease => nominal_pu - min_pu,
    }
}

/// Cost weights of one LCC link under either objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LccCostWeights {
    /// `α (u/Z)²`: links with larger margin `Z` are cheaper to move.
    Margin { alpha: f64, margin_pu: f64 },
    /// `e (u/Kᶠ)²`: links into systems with larger regulation coefficient
    /// `Kᶠ` are cheaper to move.
    AdjacentFrequency { e: f64, kf: f64 },
}

impl LccCostWeights {
    /// Coefficient `c` of the quadratic form `c u²`.
    pub fn quadratic_coeff(&self) -> f64 {
        match *self {
            LccCostWeights::Margin { alpha, margin_pu } => alpha / (margin_pu * margin_pu),
            LccCostWeights::AdjacentFrequency { e, kf } => e / (kf * kf),
        }
    }
}

/// Quadratic LCC regulation cost.
pub fn cost_lcc(u_pu: f64, weights: &LccCostWeights) -> f64 {
    weights.quadratic_coeff() * u_pu * u_pu
}

/// One generator entry of an allocation problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenCost {
    pub beta: f64,
}

/// One LCC entry: quadratic weight plus the regulation box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LccCost {
    pub weights: LccCostWeights,
    pub u_min_pu: f64,
    pub u_max_pu: f64,
}

/// The allocation problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct OefcProblem {
    pub generators: Vec<GenCost>,
    pub lccs: Vec<LccCost>,
    /// Total imbalance `b = Σ Pᵢ + Σ Pᴰᵢ` (p.u.).
    pub imbalance_pu: f64,
}

impl OefcProblem {
    pub fn validate(&self) -> Result<(), OefcError> {
        for (i, g) in self.generators.iter().enumerate() {
            if !(g.beta > 0.0) {
                return Err(OefcError::InvalidProblem(format!(
                    "generator {i}: β must be positive"
                )));
            }
        }
        for (i, l) in self.lccs.iter().enumerate() {
            if !(l.weights.quadratic_coeff() > 0.0) {
                return Err(OefcError::InvalidProblem(format!(
                    "LCC {i}: quadratic weight must be positive"
                )));
            }
            if !(l.u_min_pu <= 0.0 && 0.0 <= l.u_max_pu) {
                return Err(OefcError::InvalidProblem(format!(
                    "LCC {i}: regulation box must contain zero"
                )));
            }
        }
        Ok(())
    }

    /// Closed-form optimal droop coefficients `(kᴳ per generator, kᴰ per LCC)`.
    pub fn optimal_droop(&self) -> (Vec<f64>, Vec<f64>) {
        let gen = self.generators.iter().map(|g| 1.0 / g.beta).collect();
        let lcc = self
            .lccs
            .iter()
            .map(|l| 1.0 / (2.0 * l.weights.quadratic_coeff()))
            .collect();
        (gen, lcc)
    }

    /// Total cost of an allocation.
    pub fn total_cost(&self, u_gen: &[f64], u_lcc: &[f64]) -> f64 {
        let g: f64 = self
            .generators
            .iter()
            .zip(u_gen)
            .map(|(gc, &u)| cost_generator(u, gc.beta))
            .sum();
        let d: f64 = self
            .lccs
            .iter()
            .zip(u_lcc)
            .map(|(lc, &u)| cost_lcc(u, &lc.weights))
            .sum();
        g + d
    }

    fn balance_at(&self, lambda: f64) -> f64 {
        let gen: f64 = self.generators.iter().map(|g| -lambda / g.beta).sum();
        let lcc: f64 = self
            .lccs
            .iter()
            .map(|l| (-lambda / (2.0 * l.weights.quadratic_coeff())).clamp(l.u_min_pu, l.u_max_pu))
            .sum();
        gen + lcc + self.imbalance_pu
    }
}

/// Arithmetic mean applied to every unit of a class.
pub fn average_droop(coefficients: &[f64]) -> f64 {
    assert!(!coefficients.is_empty(), "average of an empty class");
    coefficients.iter().sum::<f64>() / coefficients.len() as f64
}

/// An allocation with its dual variable and active-set flags.
#[derive(Debug, Clone, PartialEq)]
pub struct OefcSolution {
    pub u_gen_pu: Vec<f64>,
    pub u_lcc_pu: Vec<f64>,
    /// Dual variable of the balance constraint; equals the synchronous
    /// frequency deviation of the droop-controlled closed loop.
    pub lambda: f64,
    pub total_cost: f64,
    pub at_lower: Vec<bool>,
    pub at_upper: Vec<bool>,
}

/// Solves the allocation problem by bisection on the dual variable.
///
/// The KKT conditions give `uᴳ(λ) = −λ/β` and `uᴰ(λ)` as the box projection
/// of `−λ/(2c)`; the balance residual is continuous and non-increasing in
/// `λ`, so the root is found by bisection to `tol` on the residual.
pub fn solve_oefc_oracle(problem: &OefcProblem, tol: f64) -> Result<OefcSolution, OefcError> {
    problem.validate()?;
    if problem.generators.is_empty() && problem.lccs.is_empty() {
        return Err(OefcError::InvalidProblem("no regulating units".into()));
    }

    let max_beta = problem
        .generators
        .iter()
        .map(|g| g.beta)
        .fold(0.0f64, f64::max);
    let mut hi = problem.imbalance_pu.abs() * max_beta.max(1.0) + 1.0;
    let mut lo = -hi;
    // g(lo) ≥ 0 ≥ g(hi) must hold; expand geometrically if the initial
    // bracket misses (possible only when every unit is boxed).
    let mut expansions = 0;
    while problem.balance_at(lo) < 0.0 || problem.balance_at(hi) > 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(OefcError::Infeasible);
        }
    }

    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..200 {
        lambda = 0.5 * (lo + hi);
        let g = problem.balance_at(lambda);
        if g.abs() <= tol {
            break;
        }
        if g > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    if problem.balance_at(lambda).abs() > tol {
        return Err(OefcError::Infeasible);
    }

    let u_gen_pu: Vec<f64> = problem
        .generators
        .iter()
        .map(|g| -lambda / g.beta)
        .collect();
    let mut u_lcc_pu = Vec::with_capacity(problem.lccs.len());
    let mut at_lower = Vec::with_capacity(problem.lccs.len());
    let mut at_upper = Vec::with_capacity(problem.lccs.len());
    for l in &problem.lccs {
        let unclamped = -lambda / (2.0 * l.weights.quadratic_coeff());
        let u = unclamped.clamp(l.u_min_pu, l.u_max_pu);
        at_lower.push(unclamped < l.u_min_pu);
        at_upper.push(unclamped > l.u_max_pu);
        u_lcc_pu.push(u);
    }
    let total_cost = problem.total_cost(&u_gen_pu, &u_lcc_pu);
    Ok(OefcSolution {
        u_gen_pu,
        u_lcc_pu,
        lambda,
        total_cost,
        at_lower,
        at_upper,
    })
}

/// Solves many problems; runs on rayon when the `parallel` feature is on.
pub fn solve_batch(problems: &[OefcProblem], tol: f64) -> Vec<Result<OefcSolution, OefcError>> {
    par::map(problems, |p| solve_oefc_oracle(p, tol))
}

/// Always-sequential variant of [`solve_batch`].
pub fn solve_batch_serial(
    problems: &[OefcProblem],
    tol: f64,
) -> Vec<Result<OefcSolution, OefcError>> {
    par::map_serial(problems, |p| solve_oefc_oracle(p, tol))
}

/// Lagrangian dual function `Φ(λ)` with the box-projected minimizers
/// substituted.
pub fn dual_function_value(lambda: f64, problem: &OefcProblem) -> f64 {
    let gen: f64 = problem
        .generators
        .iter()
        .map(|g| -lambda * lambda / (2.0 * g.beta))
        .sum();
    let lcc: f64 = problem
        .lccs
        .iter()
        .map(|l| {
            let c = l.weights.quadratic_coeff();
            let u = (-lambda / (2.0 * c)).clamp(l.u_min_pu, l.u_max_pu);
            c * u * u + lambda * u
        })
        .sum();
    gen + lcc + lambda * problem.imbalance_pu
}

/// Per-bus droop coefficients applied to a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coefficients {
    /// Effective generator droop kᴳ by bus.
    pub gen_k: BTreeMap<usize, f64>,
    /// LCC droop kᴰ by bus.
    pub lcc_k: BTreeMap<usize, f64>,
}

impl Coefficients {
    pub fn total_gen(&self) -> f64 {
        self.gen_k.values().sum()
    }

    pub fn total_lcc(&self) -> f64 {
        self.lcc_k.values().sum()
    }
}

/// Optimal coefficient of one LCC for the given objective.
fn optimal_lcc_k(
    network: &Network,
    bus: usize,
    objective: Objective,
    direction: MarginDirection,
) -> Result<f64, OefcError> {
    let p = network.lcc_params(bus).expect("validated lcc bus");
    let weights = match objective {
        Objective::RegulationMargin => {
            let alpha = p.alpha.ok_or(OefcError::MissingParameter {
                bus,
                field: "alpha",
            })?;
            let margin = regulation_margin(p.nominal_pu, p.max_pu, p.min_pu, direction);
            if !(margin > 0.0) {
                return Err(OefcError::InvalidProblem(format!(
                    "LCC at bus {bus}: zero regulation margin in the selected direction"
                )));
            }
            LccCostWeights::Margin {
                alpha,
                margin_pu: margin,
            }
        }
        Objective::AdjacentFrequency => {
            let kf = p
                .freq_reg_kf
                .ok_or(OefcError::MissingParameter { bus, field: "kf" })?;
            let e = p
                .cost_e
                .ok_or(OefcError::MissingParameter { bus, field: "e" })?;
            LccCostWeights::AdjacentFrequency { e, kf }
        }
    };
    Ok(1.0 / (2.0 * weights.quadratic_coeff()))
}

/// Resolves the droop coefficients a scenario applies: closed-form optimal,
/// class-wise averages of optimal, or manual overrides.
pub fn resolve_coefficients(
    network: &Network,
    control: &ControlConfig,
) -> Result<Coefficients, OefcError> {
    let gen_buses = network.generator_buses();
    let lcc_buses = network.lcc_buses();
    let mut coeff = Coefficients::default();

    match control.selection {
        DroopSelection::Optimal => {
            for &bus in &gen_buses {
                let p = network.generator_params(bus).expect("validated");
                coeff.gen_k.insert(bus, 1.0 / p.cost_beta);
            }
            for &bus in &lcc_buses {
                let k = optimal_lcc_k(network, bus, control.objective, control.margin_direction)?;
                coeff.lcc_k.insert(bus, k);
            }
        }
        DroopSelection::Average => {
            let gen_opt: Vec<f64> = gen_buses
                .iter()
                .map(|&b| 1.0 / network.generator_params(b).expect("validated").cost_beta)
                .collect();
            let lcc_opt: Vec<f64> = lcc_buses
                .iter()
                .map(|&b| optimal_lcc_k(network, b, control.objective, control.margin_direction))
                .collect::<Result<_, _>>()?;
            if !gen_opt.is_empty() {
                let mean = average_droop(&gen_opt);
                for &bus in &gen_buses {
                    coeff.gen_k.insert(bus, mean);
                }
            }
            if !lcc_opt.is_empty() {
                let mean = average_droop(&lcc_opt);
                for &bus in &lcc_buses {
                    coeff.lcc_k.insert(bus, mean);
                }
            }
        }
        DroopSelection::Manual => {
            for &bus in &gen_buses {
                let p = network.generator_params(bus).expect("validated");
                let k = control.manual_gen.get(&bus).copied().unwrap_or_else(|| {
                    crate::droop::effective_gen_droop(p.governor_droop, p.damping)
                });
                coeff.gen_k.insert(bus, k);
            }
            for &bus in &lcc_buses {
                let k = control.manual_lcc.get(&bus).copied().unwrap_or(0.0);
                coeff.lcc_k.insert(bus, k);
            }
        }
    }
    Ok(coeff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Reference problem: seven generators, four import/export links with
    /// margin weights, imbalance −5.3 p.u.
    pub(crate) fn reference_problem(imbalance: f64) -> OefcProblem {
        let betas = [0.1, 0.2, 0.2, 0.2, 0.1, 0.1, 0.2];
        let margins = [1.05, 1.2, 0.9, 1.0];
        let boxes = [(-0.95, 1.05), (-0.8, 1.2), (-1.1, 0.9), (-1.0, 1.0)];
        OefcProblem {
            generators: betas.iter().map(|&beta| GenCost { beta }).collect(),
            lccs: margins
                .iter()
                .zip(boxes)
                .map(|(&margin_pu, (lo, hi))| LccCost {
                    weights: LccCostWeights::Margin {
                        alpha: 0.05,
                        margin_pu,
                    },
                    u_min_pu: lo,
                    u_max_pu: hi,
                })
                .collect(),
            imbalance_pu: imbalance,
        }
    }

    fn random_interior_problem(rng: &mut StdRng) -> OefcProblem {
        let n_gen = rng.random_range(1..5);
        let n_lcc = rng.random_range(1..5);
        let generators = (0..n_gen)
            .map(|_| GenCost {
                beta: rng.random_range(0.05..0.5),
            })
            .collect();
        let lccs = (0..n_lcc)
            .map(|_| LccCost {
                weights: LccCostWeights::Margin {
                    alpha: rng.random_range(0.02..0.2),
                    margin_pu: rng.random_range(0.5..2.0),
                },
                // Wide boxes keep the optimum interior.
                u_min_pu: -50.0,
                u_max_pu: 50.0,
            })
            .collect();
        OefcProblem {
            generators,
            lccs,
            imbalance_pu: rng.random_range(-3.0..3.0),
        }
    }

    #[test]
    fn generator_cost_examples() {
        assert_eq!(cost_generator(0.0, 0.3), 0.0);
        assert_eq!(cost_generator(1.0, 0.1), 0.05);
        assert_eq!(cost_generator(-1.0, 0.1), 0.05);
    }

    #[test]
    fn regulation_margin_table_values() {
        // LCC1: 645 MW nominal, 750/550 MW bounds, on a 100 MVA base.
        assert_relative_eq!(
            regulation_margin(6.45, 7.5, 5.5, MarginDirection::Increase),
            1.05
        );
        assert_relative_eq!(
            regulation_margin(6.45, 7.5, 5.5, MarginDirection::Decrease),
            0.95
        );
        assert_eq!(
            regulation_margin(7.5, 7.5, 5.5, MarginDirection::Increase),
            0.0
        );
    }

    #[test]
    fn lcc_cost_examples() {
        let w = LccCostWeights::Margin {
            alpha: 0.05,
            margin_pu: 1.05,
        };
        assert_relative_eq!(cost_lcc(1.05, &w), 0.05, max_relative = 1e-12);
        assert_eq!(
            cost_lcc(
                0.0,
                &LccCostWeights::AdjacentFrequency { e: 30.0, kf: 25.0 }
            ),
            0.0
        );
        let direct = 0.05 * (0.5f64 / 1.05).powi(2);
        assert_relative_eq!(cost_lcc(0.5, &w), direct, max_relative = 1e-12);
        assert!((cost_lcc(0.5, &w) - 0.011338).abs() < 1e-6);
    }

    #[test]
    fn optimal_droop_reproduces_reference_coefficients() {
        let problem = reference_problem(-5.3);
        let (gen_k, lcc_k) = problem.optimal_droop();
        assert_relative_eq!(gen_k[0], 10.0);
        assert_relative_eq!(gen_k[1], 5.0);
        let expected = [11.03, 14.40, 8.10, 10.00];
        for (k, e) in lcc_k.iter().zip(expected) {
            assert!((k - e).abs() <= 0.005 + 1e-12, "got {k}, expected ≈{e}");
        }

        // Adjacent-frequency objective: k = (Kᶠ)²/(2e).
        let kfs = [25.0, 30.0, 20.0, 25.0];
        let expected2 = [10.42, 15.00, 6.67, 10.42];
        for (kf, e) in kfs.iter().zip(expected2) {
            let w = LccCostWeights::AdjacentFrequency { e: 30.0, kf: *kf };
            let k = 1.0 / (2.0 * w.quadratic_coeff());
            assert!((k - e).abs() <= 0.005 + 1e-12, "got {k}, expected ≈{e}");
        }
    }

    #[test]
    fn average_droop_matches_reference_means() {
        let obj1 = [11.025, 14.4, 8.1, 10.0];
        assert!((average_droop(&obj1) - 10.88).abs() <= 0.005 + 1e-12);
        let obj2 = [625.0 / 60.0, 15.0, 400.0 / 60.0, 625.0 / 60.0];
        assert!((average_droop(&obj2) - 10.63).abs() <= 0.005 + 1e-12);
        let gens = [10.0, 10.0, 10.0, 5.0, 5.0, 5.0, 5.0];
        assert!((average_droop(&gens) - 7.14).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn oracle_balanced_problem_is_trivial() {
        let solution = solve_oefc_oracle(&reference_problem(0.0), 1e-12).unwrap();
        assert_eq!(solution.lambda, 0.0);
        assert!(solution.u_gen_pu.iter().all(|&u| u == 0.0));
        assert!(solution.u_lcc_pu.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn oracle_single_generator() {
        let problem = OefcProblem {
            generators: vec![GenCost { beta: 0.1 }],
            lccs: vec![],
            imbalance_pu: -1.0,
        };
        let solution = solve_oefc_oracle(&problem, 1e-12).unwrap();
        assert_relative_eq!(solution.u_gen_pu[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(solution.lambda, -0.1, epsilon = 1e-10);
    }

    #[test]
    fn oracle_matches_droop_allocation_on_reference_problem() {
        let problem = reference_problem(-5.3);
        let solution = solve_oefc_oracle(&problem, 1e-12).unwrap();
        let (gen_k, lcc_k) = problem.optimal_droop();
        let total_k: f64 = gen_k.iter().sum::<f64>() + lcc_k.iter().sum::<f64>();
        let omega_syn = problem.imbalance_pu / total_k;
        assert_relative_eq!(solution.lambda, omega_syn, epsilon = 1e-10);
        assert_relative_eq!(solution.lambda, -5.3 / 93.525, epsilon = 1e-9);
        assert!(solution.at_lower.iter().all(|&b| !b));
        assert!(solution.at_upper.iter().all(|&b| !b));
        for (u, k) in solution.u_gen_pu.iter().zip(&gen_k) {
            assert_relative_eq!(*u, -k * omega_syn, epsilon = 1e-9);
        }
        for (u, k) in solution.u_lcc_pu.iter().zip(&lcc_k) {
            assert_relative_eq!(*u, -k * omega_syn, epsilon = 1e-9);
        }
    }

    #[test]
    fn oracle_balance_and_theorem_consistency_randomized() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let problem = random_interior_problem(&mut rng);
            let solution = solve_oefc_oracle(&problem, 1e-12).unwrap();
            let balance: f64 = solution.u_gen_pu.iter().sum::<f64>()
                + solution.u_lcc_pu.iter().sum::<f64>()
                + problem.imbalance_pu;
            assert!(balance.abs() <= 1e-12, "balance residual {balance}");

            let (gen_k, lcc_k) = problem.optimal_droop();
            let total: f64 = gen_k.iter().sum::<f64>() + lcc_k.iter().sum::<f64>();
            let lambda = problem.imbalance_pu / total;
            for (u, k) in solution.u_gen_pu.iter().zip(&gen_k) {
                assert!((u - (-k * lambda)).abs() < 1e-9);
            }
            for (u, k) in solution.u_lcc_pu.iter().zip(&lcc_k) {
                assert!((u - (-k * lambda)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oracle_respects_binding_boxes() {
        let mut problem = reference_problem(-5.3);
        problem.lccs[1].u_max_pu = 0.3; // force the cheapest link to its bound
        let solution = solve_oefc_oracle(&problem, 1e-12).unwrap();
        assert!(solution.at_upper[1]);
        assert_relative_eq!(solution.u_lcc_pu[1], 0.3);
        let balance: f64 = solution.u_gen_pu.iter().sum::<f64>()
            + solution.u_lcc_pu.iter().sum::<f64>()
            + problem.imbalance_pu;
        assert!(balance.abs() <= 1e-12);
    }

    #[test]
    fn enlarging_a_box_never_increases_cost() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let mut problem = random_interior_problem(&mut rng);
            problem.lccs[0].u_min_pu = -0.1;
            problem.lccs[0].u_max_pu = 0.1;
            let tight = solve_oefc_oracle(&problem, 1e-12).unwrap();
            problem.lccs[0].u_min_pu = -1.0;
            problem.lccs[0].u_max_pu = 1.0;
            let wide = solve_oefc_oracle(&problem, 1e-12).unwrap();
            assert!(wide.total_cost <= tight.total_cost + 1e-9);
        }
    }

    #[test]
    fn cost_scaling_leaves_allocation_invariant() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let problem = random_interior_problem(&mut rng);
            let scale = rng.random_range(0.1..10.0);
            let scaled = OefcProblem {
                generators: problem
                    .generators
                    .iter()
                    .map(|g| GenCost {
                        beta: g.beta * scale,
                    })
                    .collect(),
                lccs: problem
                    .lccs
                    .iter()
                    .map(|l| {
                        let LccCostWeights::Margin { alpha, margin_pu } = l.weights else {
                            unreachable!()
                        };
                        LccCost {
                            weights: LccCostWeights::Margin {
                                alpha: alpha * scale,
                                margin_pu,
                            },
                            ..*l
                        }
                    })
                    .collect(),
                imbalance_pu: problem.imbalance_pu,
            };
            let base = solve_oefc_oracle(&problem, 1e-12).unwrap();
            let after = solve_oefc_oracle(&scaled, 1e-12).unwrap();
            for (a, b) in base.u_gen_pu.iter().zip(&after.u_gen_pu) {
                assert!((a - b).abs() < 1e-8);
            }
            for (a, b) in base.u_lcc_pu.iter().zip(&after.u_lcc_pu) {
                assert!((a - b).abs() < 1e-8);
            }
            let (g0, l0) = problem.optimal_droop();
            let (g1, l1) = scaled.optimal_droop();
            for (a, b) in g0.iter().zip(&g1) {
                assert_relative_eq!(a / scale, *b, max_relative = 1e-12);
            }
            for (a, b) in l0.iter().zip(&l1) {
                assert_relative_eq!(a / scale, *b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn dual_function_weak_and_strong_duality() {
        let mut rng = StdRng::seed_from_u64(17);
        assert_eq!(
            dual_function_value(
                0.0,
                &OefcProblem {
                    generators: vec![GenCost { beta: 0.1 }],
                    lccs: vec![],
                    imbalance_pu: 0.0
                }
            ),
            0.0
        );
        for _ in 0..50 {
            let problem = random_interior_problem(&mut rng);
            let solution = solve_oefc_oracle(&problem, 1e-12).unwrap();
            // Strong duality at the oracle's dual point.
            let phi_star = dual_function_value(solution.lambda, &problem);
            assert!(
                (phi_star - solution.total_cost).abs() < 1e-8,
                "Φ(λ*)={phi_star} vs cost {}",
                solution.total_cost
            );
            // Weak duality at random dual points.
            for _ in 0..20 {
                let lambda = rng.random_range(-1.0..1.0);
                assert!(dual_function_value(lambda, &problem) <= solution.total_cost + 1e-9);
            }
        }
    }

    #[test]
    fn dual_function_is_concave_on_midpoints() {
        let mut rng = StdRng::seed_from_u64(19);
        let problem = reference_problem(-5.3);
        for _ in 0..1000 {
            let a = rng.random_range(-1.0..1.0);
            let b = rng.random_range(-1.0..1.0);
            let mid = 0.5 * (a + b);
            let lhs = dual_function_value(mid, &problem);
            let rhs = 0.5 * (dual_function_value(a, &problem) + dual_function_value(b, &problem));
            assert!(lhs >= rhs - 1e-12, "concavity violated at ({a},{b})");
        }
    }

    #[test]
    fn batch_and_serial_agree() {
        let mut rng = StdRng::seed_from_u64(23);
        let problems: Vec<OefcProblem> =
            (0..64).map(|_| random_interior_problem(&mut rng)).collect();
        let a = solve_batch(&problems, 1e-12);
        let b = solve_batch_serial(&problems, 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }

    #[test]
    fn coefficient_positivity_randomized() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..200 {
            let problem = random_interior_problem(&mut rng);
            let (gen_k, lcc_k) = problem.optimal_droop();
            assert!(gen_k.iter().all(|&k| k > 0.0));
            assert!(lcc_k.iter().all(|&k| k > 0.0));
        }
    }
}
