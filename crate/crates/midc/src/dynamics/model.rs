//! Run-time view of a network under a given controller configuration,
//! mutable by events.

use crate::droop::LccDroopController;
use crate::grid::{BusRole, EventKind, LccParams, Network, PerUnitBases};
use crate::grid::{MarginDirection, Objective};
use crate::oefc::regulation_margin;
use crate::oefc::{Coefficients, GenCost, LccCost, LccCostWeights, OefcProblem};

use super::SolveError;

/// An active generator.
#[derive(Debug, Clone, Copy)]
pub struct GenUnit {
    pub bus: usize,
    pub inertia: f64,
    /// Effective droop kᴳ = governor + damping, or the configured override.
    pub k_eff: f64,
    pub cost_beta: f64,
}

/// One LCC link, in both frames: the controller works on physical
/// (rectifier) orders, the network equation on the signed model power.
#[derive(Debug, Clone, Copy)]
pub struct LccUnit {
    pub bus: usize,
    pub k_d: f64,
    pub t_d_s: f64,
    /// Signed nominal model power Pᴰ.
    pub p_nominal_pu: f64,
    pub p_min_pu: f64,
    pub p_max_pu: f64,
    /// model = sign · physical order.
    pub sign: f64,
    pub blocked: bool,
    pub params: LccParams,
    /// Controller template used to (re)initialize run state.
    pub controller: LccDroopController,
}

/// Per-step linearization regime of one LCC, frozen across the RK stages of
/// a step so the index-reduction solve stays linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LccRegime {
    /// Active droop, order inside limits: target Pᴰ − kᴰω.
    Affine,
    /// Gated, saturated or blocked: the order target is a constant.
    Fixed { target_pu: f64 },
}

/// The simulation model: current roles and injections (events mutate
/// these), line list with effective susceptances, and unit tables.
#[derive(Debug, Clone)]
pub struct SimModel {
    pub n: usize,
    pub roles: Vec<BusRole>,
    pub injection_pu: Vec<f64>,
    /// (from, to, effective susceptance).
    pub lines: Vec<(usize, usize, f64)>,
    pub gens: Vec<GenUnit>,
    pub lccs: Vec<LccUnit>,
    pub bases: PerUnitBases,
    pub dead_zone_pu: f64,
}

impl SimModel {
    pub fn build(network: &Network, coefficients: &Coefficients, dead_zone_pu: f64) -> Self {
        let n = network.n();
        let roles = network.buses().iter().map(|b| b.role).collect();
        let injection_pu = network.buses().iter().map(|b| b.injection_pu).collect();
        let lines = network
            .lines()
            .iter()
            .map(|l| (l.from(), l.to(), network.effective_susceptance(l)))
            .collect();
        let gens = network
            .generator_buses()
            .into_iter()
            .map(|bus| {
                let p = network.generator_params(bus).expect("validated");
                GenUnit {
                    bus,
                    inertia: p.inertia,
                    k_eff: coefficients.gen_k.get(&bus).copied().unwrap_or_else(|| {
                        crate::droop::effective_gen_droop(p.governor_droop, p.damping)
                    }),
                    cost_beta: p.cost_beta,
                }
            })
            .collect();
        let lccs = network
            .lcc_buses()
            .into_iter()
            .map(|bus| {
                let p = *network.lcc_params(bus).expect("validated");
                let k_d = coefficients.lcc_k.get(&bus).copied().unwrap_or(0.0);
                let sign = p.model_sign();
                // Physical order frame: for exporting links the bounds flip.
                let (order_min, order_max) = if sign > 0.0 {
                    (p.min_pu, p.max_pu)
                } else {
                    (-p.max_pu, -p.min_pu)
                };
                let (k_re, k_se) = if sign > 0.0 { (k_d, 0.0) } else { (0.0, k_d) };
                let controller = LccDroopController::new(
                    k_re,
                    k_se,
                    sign * p.nominal_pu,
                    order_min,
                    order_max,
                    dead_zone_pu,
                )
                .expect("validated bounds contain nominal");
                LccUnit {
                    bus,
                    k_d,
                    t_d_s: p.time_constant_s,
                    p_nominal_pu: p.nominal_pu,
                    p_min_pu: p.min_pu,
                    p_max_pu: p.max_pu,
                    sign,
                    blocked: false,
                    params: p,
                    controller,
                }
            })
            .collect();
        Self {
            n,
            roles,
            injection_pu,
            lines,
            gens,
            lccs,
            bases: network.bases(),
            dead_zone_pu,
        }
    }

    /// Applies one event, mutating roles, injections and unit tables.
    pub fn apply_event(&mut self, kind: &EventKind) -> Result<(), SolveError> {
        match *kind {
            EventKind::GeneratorTrip { bus } => {
                let before = self.gens.len();
                self.gens.retain(|g| g.bus != bus);
                if self.gens.len() == before {
                    return Err(SolveError::InvalidEvent(format!(
                        "no active generator at bus {bus}"
                    )));
                }
                self.roles[bus] = BusRole::Passive;
                self.injection_pu[bus] = 0.0;
            }
            EventKind::DcBlock { bus } => {
                let unit = self
                    .lccs
                    .iter_mut()
                    .find(|l| l.bus == bus)
                    .ok_or_else(|| SolveError::InvalidEvent(format!("no LCC at bus {bus}")))?;
                unit.blocked = true;
            }
            EventKind::PowerStep { bus, delta_pu } => {
                if bus >= self.n {
                    return Err(SolveError::InvalidEvent(format!("no bus {bus}")));
                }
                self.injection_pu[bus] += delta_pu;
            }
        }
        Ok(())
    }

    /// A copy with the structural effect of all events applied (for
    /// post-fault steady-state and certificate computations).
    pub fn after_events(&self, events: &[crate::grid::Event]) -> Result<Self, SolveError> {
        let mut model = self.clone();
        for event in events {
            model.apply_event(&event.kind)?;
        }
        Ok(model)
    }

    /// Lowest-indexed active generator bus, the relative-angle reference.
    pub fn reference_bus(&self) -> Result<usize, SolveError> {
        self.gens
            .first()
            .map(|g| g.bus)
            .ok_or(SolveError::NoActiveGenerator)
    }

    /// Non-generator buses in ascending order (the algebraic block).
    pub fn algebraic_buses(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.roles[i] != BusRole::Generator)
            .collect()
    }

    pub fn lcc_index_of_bus(&self, bus: usize) -> Option<usize> {
        self.lccs.iter().position(|l| l.bus == bus)
    }

    /// Net algebraic injection per bus: Pᵢ plus the DC power at LCC buses.
    pub fn net_injections(&self, pdc: &[f64]) -> Vec<f64> {
        let mut q = self.injection_pu.clone();
        for (unit, &p) in self.lccs.iter().zip(pdc) {
            q[unit.bus] += p;
        }
        q
    }

    /// Total imbalance of the current (post-event) system at nominal DC
    /// powers: Σ Pᵢ + Σ Pᴰ over unblocked links.
    pub fn imbalance_pu(&self) -> f64 {
        let inj: f64 = self.injection_pu.iter().sum();
        let dc: f64 = self
            .lccs
            .iter()
            .filter(|l| !l.blocked)
            .map(|l| l.p_nominal_pu)
            .sum();
        inj + dc
    }

    /// Sum of generator droops plus unblocked LCC droops.
    pub fn total_droop(&self) -> f64 {
        let g: f64 = self.gens.iter().map(|g| g.k_eff).sum();
        let d: f64 = self.lccs.iter().filter(|l| !l.blocked).map(|l| l.k_d).sum();
        g + d
    }

    /// The allocation problem over the current unit set. Regulation boxes
    /// come from the model-frame power bounds; blocked links are excluded.
    pub fn oefc_problem(
        &self,
        objective: Objective,
        direction: MarginDirection,
    ) -> Result<OefcProblem, crate::oefc::OefcError> {
        let generators = self
            .gens
            .iter()
            .map(|g| GenCost { beta: g.cost_beta })
            .collect();
        let mut lccs = Vec::new();
        for unit in self.lccs.iter().filter(|l| !l.blocked) {
            let weights = match objective {
                Objective::RegulationMargin => {
                    let alpha =
                        unit.params
                            .alpha
                            .ok_or(crate::oefc::OefcError::MissingParameter {
                                bus: unit.bus,
                                field: "alpha",
                            })?;
                    LccCostWeights::Margin {
                        alpha,
                        margin_pu: regulation_margin(
                            unit.p_nominal_pu,
                            unit.p_max_pu,
                            unit.p_min_pu,
                            direction,
                        ),
                    }
                }
                Objective::AdjacentFrequency => LccCostWeights::AdjacentFrequency {
                    e: unit
                        .params
                        .cost_e
                        .ok_or(crate::oefc::OefcError::MissingParameter {
                            bus: unit.bus,
                            field: "e",
                        })?,
                    kf: unit.params.freq_reg_kf.ok_or(
                        crate::oefc::OefcError::MissingParameter {
                            bus: unit.bus,
                            field: "kf",
                        },
                    )?,
                },
            };
            lccs.push(LccCost {
                weights,
                u_min_pu: unit.p_min_pu - unit.p_nominal_pu,
                u_max_pu: unit.p_max_pu - unit.p_nominal_pu,
            });
        }
        Ok(OefcProblem {
            generators,
            lccs,
            imbalance_pu: self.imbalance_pu(),
        })
    }

    /// Changes one LCC's droop, keeping the controller channel gain in
    /// step with the model-frame coefficient.
    pub fn set_lcc_droop(&mut self, idx: usize, k_d: f64) {
        let unit = &mut self.lccs[idx];
        unit.k_d = k_d;
        if unit.sign > 0.0 {
            unit.controller.k_re = k_d;
        } else {
            unit.controller.k_se = k_d;
        }
    }

    /// Frozen per-step regime of each LCC, decided from the frequencies of
    /// the previous consistency solve and the current controller state.
    pub fn regimes(&self, omega: &[f64], controllers: &[LccDroopController]) -> Vec<LccRegime> {
        self.lccs
            .iter()
            .zip(controllers)
            .map(|(unit, ctrl)| {
                if unit.blocked {
                    return LccRegime::Fixed { target_pu: 0.0 };
                }
                let w = omega[unit.bus];
                let (w_re, w_se) = unit.channel_inputs(w);
                let order = ctrl.peek_order(w_re, w_se);
                let target = unit.sign * order.power_pu;
                if order.saturated {
                    return LccRegime::Fixed { target_pu: target };
                }
                // Gated channel: the order sticks at nominal.
                let gated = !(ctrl.re_latched || ctrl.se_latched || w.abs() >= ctrl.dead_zone_pu);
                if gated {
                    LccRegime::Fixed {
                        target_pu: unit.p_nominal_pu,
                    }
                } else {
                    LccRegime::Affine
                }
            })
            .collect()
    }
}

impl LccUnit {
    /// Routes the main-system bus frequency to the channel that observes
    /// it: the RE channel when the main system receives, the SE channel
    /// when it sends. The remote channel sees no deviation (adjacent AC
    /// dynamics are out of model).
    pub fn channel_inputs(&self, omega_bus: f64) -> (f64, f64) {
        if self.sign > 0.0 {
            (omega_bus, 0.0)
        } else {
            (0.0, omega_bus)
        }
    }

    /// Order target in the model frame for a given bus frequency, clamped,
    /// with the controller's current discrete state.
    pub fn model_target(&self, ctrl: &LccDroopController, omega_bus: f64) -> (f64, bool) {
        let (w_re, w_se) = self.channel_inputs(omega_bus);
        let order = ctrl.peek_order(w_re, w_se);
        (self.sign * order.power_pu, order.saturated)
    }
}
