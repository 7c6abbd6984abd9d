//! Network data model, per-unit conventions and scenario ingestion.
//!
//! The grid is a connected graph of buses joined by lossless susceptive
//! lines. Buses carry exactly one role: `Generator` (swing dynamics),
//! `LccConnected` (an LCC-HVDC converter feeds in here) or `Passive`
//! (algebraic load bus). All powers are per-unit on the system MVA base;
//! frequencies are stored as per-unit deviation from nominal and converted
//! to Hz only at the output layer.

mod config;
mod fixtures;
mod scenario;

pub use config::{load_scenario, load_system, to_config_text, ConfigError, SystemSpec};
pub use fixtures::{bundled_fixture, bundled_fixture_names};
pub use scenario::{
    ControlConfig, DroopSelection, Event, EventKind, MarginDirection, Objective, Scenario,
    SimParams,
};

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// System bases used to convert between physical and per-unit quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBases {
    pub power_base_mva: f64,
    pub nominal_frequency_hz: f64,
}

impl Default for PerUnitBases {
    fn default() -> Self {
        Self {
            power_base_mva: 100.0,
            nominal_frequency_hz: 50.0,
        }
    }
}

impl PerUnitBases {
    pub fn mw_to_pu(&self, mw: f64) -> f64 {
        mw / self.power_base_mva
    }

    pub fn pu_to_mw(&self, pu: f64) -> f64 {
        pu * self.power_base_mva
    }

    /// Frequency deviation in Hz to per-unit deviation.
    pub fn hz_to_pu(&self, hz: f64) -> f64 {
        hz / self.nominal_frequency_hz
    }

    /// Per-unit frequency deviation to absolute frequency in Hz.
    pub fn pu_to_frequency_hz(&self, omega_pu: f64) -> f64 {
        self.nominal_frequency_hz * (1.0 + omega_pu)
    }
}

/// Role of a bus in the network partition. Roles are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusRole {
    Generator,
    LccConnected,
    Passive,
}

/// A network bus: id, role, local active-power injection (positive) or
/// demand (negative), and constant voltage magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub role: BusRole,
    pub injection_pu: f64,
    pub voltage_pu: f64,
}

/// A lossless transmission line with base susceptance `B̄ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    from: usize,
    to: usize,
    base_susceptance_pu: f64,
}

impl Line {
    pub fn new(from: usize, to: usize, base_susceptance_pu: f64) -> Result<Self, GridError> {
        if from == to {
            return Err(GridError::InvalidLine {
                from,
                to,
                reason: "self-loop".into(),
            });
        }
        if !(base_susceptance_pu > 0.0) {
            return Err(GridError::InvalidLine {
                from,
                to,
                reason: format!("susceptance must be positive, got {base_susceptance_pu}"),
            });
        }
        Ok(Self {
            from,
            to,
            base_susceptance_pu,
        })
    }

    pub fn from(&self) -> usize {
        self.from
    }

    pub fn to(&self) -> usize {
        self.to
    }

    pub fn base_susceptance_pu(&self) -> f64 {
        self.base_susceptance_pu
    }
}

/// Dynamic and cost parameters of a generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    /// Inertia constant M (p.u.·s²).
    pub inertia: f64,
    /// Damping coefficient D (p.u.).
    pub damping: f64,
    /// Governor droop k̄ᴳ (p.u.); effective droop is k̄ᴳ + D.
    pub governor_droop: f64,
    /// Quadratic regulation cost coefficient β (p.u.).
    pub cost_beta: f64,
}

impl GeneratorParams {
    fn validate(&self, bus: usize) -> Result<(), GridError> {
        let ok = self.inertia > 0.0
            && self.damping > 0.0
            && self.governor_droop >= 0.0
            && self.cost_beta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GridError::InvalidParameter {
                context: format!("generator at bus {bus}: require M>0, D>0, k̄ᴳ≥0, β>0"),
            })
        }
    }
}

/// LCC-HVDC link parameters, stored in the signed model frame: DC power is
/// positive when the main AC system receives and negative when it sends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LccParams {
    /// Nominal DC power Pᴰ (signed p.u.).
    pub nominal_pu: f64,
    /// Upper DC power bound (signed p.u.).
    pub max_pu: f64,
    /// Lower DC power bound (signed p.u.).
    pub min_pu: f64,
    /// First-order converter time constant Tᴰ (s).
    pub time_constant_s: f64,
    /// Margin-weighted cost coefficient α (p.u.), used by the
    /// regulation-margin objective.
    pub alpha: Option<f64>,
    /// Adjacent-system primary frequency-regulation coefficient Kᶠ (p.u.).
    pub freq_reg_kf: Option<f64>,
    /// Cost coefficient e (p.u.) paired with Kᶠ.
    pub cost_e: Option<f64>,
    /// DC voltage (kV) for power-order to current-order conversion.
    pub dc_voltage_kv: f64,
}

impl LccParams {
    fn validate(&self, bus: usize) -> Result<(), GridError> {
        let mut problems = Vec::new();
        if !(self.min_pu <= self.nominal_pu && self.nominal_pu <= self.max_pu) {
            problems.push("require min ≤ nominal ≤ max");
        }
        if !(self.time_constant_s > 0.0) {
            problems.push("require Tᴰ > 0");
        }
        if self.alpha.is_some_and(|a| a <= 0.0) {
            problems.push("require α > 0");
        }
        if self.freq_reg_kf.is_some_and(|k| k <= 0.0) {
            problems.push("require Kᶠ > 0");
        }
        if self.cost_e.is_some_and(|e| e <= 0.0) {
            problems.push("require e > 0");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GridError::InvalidParameter {
                context: format!("LCC at bus {bus}: {}", problems.join("; ")),
            })
        }
    }

    /// True when the main AC system is the receiving end of this link.
    pub fn main_is_receiving(&self) -> bool {
        self.max_pu > 0.0
    }

    /// Sign mapping physical (rectifier-frame, positive) power orders to the
    /// signed model frame: +1 when the main system receives, −1 when it sends.
    pub fn model_sign(&self) -> f64 {
        if self.main_is_receiving() {
            1.0
        } else {
            -1.0
        }
    }
}

/// Errors from network construction and validation.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("network graph is disconnected")]
    DisconnectedGraph,
    #[error("bus {0} declared with more than one role")]
    RolePartitionViolation(usize),
    #[error("bus {0} has more than one LCC-HVDC attachment")]
    DuplicateLccAttachment(usize),
    #[error("bus {bus} has role {role:?} but no matching parameter record")]
    MissingParams { bus: usize, role: BusRole },
    #[error("parameter record references unknown bus {0}")]
    UnknownBus(usize),
    #[error("line {from}-{to} invalid: {reason}")]
    InvalidLine {
        from: usize,
        to: usize,
        reason: String,
    },
    #[error("invalid parameter: {context}")]
    InvalidParameter { context: String },
    #[error("bus ids must be the dense range 0..n; problem near id {0}")]
    NonContiguousBusIds(usize),
}

/// A validated MIDC network. Immutable after construction; safe to share
/// across concurrent readers.
#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    gen_params: BTreeMap<usize, GeneratorParams>,
    lcc_params: BTreeMap<usize, LccParams>,
    bases: PerUnitBases,
}

/// Validates inputs and assembles a [`Network`].
///
/// Bus ids must form the dense range `0..n`. Every generator bus needs a
/// [`GeneratorParams`] record and every LCC-connected bus exactly one
/// [`LccParams`] record; the graph must be connected.
pub fn build_network(
    mut buses: Vec<Bus>,
    lines: Vec<Line>,
    gen_params: BTreeMap<usize, GeneratorParams>,
    lcc_params: BTreeMap<usize, LccParams>,
    bases: PerUnitBases,
) -> Result<Network, GridError> {
    buses.sort_by_key(|b| b.id);
    let network = Network {
        buses,
        lines,
        gen_params,
        lcc_params,
        bases,
    };
    network.validate()?;
    Ok(network)
}

impl Network {
    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn bus(&self, id: usize) -> &Bus {
        &self.buses[id]
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn bases(&self) -> PerUnitBases {
        self.bases
    }

    pub fn generator_params(&self, bus: usize) -> Option<&GeneratorParams> {
        self.gen_params.get(&bus)
    }

    pub fn lcc_params(&self, bus: usize) -> Option<&LccParams> {
        self.lcc_params.get(&bus)
    }

    /// Generator bus ids in ascending order.
    pub fn generator_buses(&self) -> Vec<usize> {
        self.role_buses(BusRole::Generator)
    }

    /// LCC-connected bus ids in ascending order.
    pub fn lcc_buses(&self) -> Vec<usize> {
        self.role_buses(BusRole::LccConnected)
    }

    /// Passive bus ids in ascending order.
    pub fn passive_buses(&self) -> Vec<usize> {
        self.role_buses(BusRole::Passive)
    }

    fn role_buses(&self, role: BusRole) -> Vec<usize> {
        self.buses
            .iter()
            .filter(|b| b.role == role)
            .map(|b| b.id)
            .collect()
    }

    /// The relative-angle reference: the lowest-indexed generator bus.
    pub fn reference_bus(&self) -> usize {
        self.buses
            .iter()
            .find(|b| b.role == BusRole::Generator)
            .map(|b| b.id)
            .expect("validated network has at least one generator")
    }

    /// Effective susceptance `B̄ᵢⱼ · Vᵢ · Vⱼ` of a line.
    pub fn effective_susceptance(&self, line: &Line) -> f64 {
        line.base_susceptance_pu * self.buses[line.from].voltage_pu * self.buses[line.to].voltage_pu
    }

    /// Re-checks every construction invariant. Idempotent.
    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.buses.len();

        let mut seen = BTreeSet::new();
        for bus in &self.buses {
            if bus.id >= n {
                return Err(GridError::NonContiguousBusIds(bus.id));
            }
            if !seen.insert(bus.id) {
                // The same id listed twice means two role declarations.
                return Err(GridError::RolePartitionViolation(bus.id));
            }
            if !(bus.voltage_pu > 0.0) {
                return Err(GridError::InvalidParameter {
                    context: format!("bus {}: voltage must be positive", bus.id),
                });
            }
        }
        // Dense ids and buses sorted by id.
        for (idx, bus) in self.buses.iter().enumerate() {
            if bus.id != idx {
                return Err(GridError::NonContiguousBusIds(bus.id));
            }
        }

        for (&bus, params) in &self.gen_params {
            if bus >= n {
                return Err(GridError::UnknownBus(bus));
            }
            if self.buses[bus].role != BusRole::Generator {
                return Err(GridError::RolePartitionViolation(bus));
            }
            params.validate(bus)?;
        }
        for (&bus, params) in &self.lcc_params {
            if bus >= n {
                return Err(GridError::UnknownBus(bus));
            }
            if self.buses[bus].role != BusRole::LccConnected {
                return Err(GridError::RolePartitionViolation(bus));
            }
            params.validate(bus)?;
        }
        for bus in &self.buses {
            match bus.role {
                BusRole::Generator if !self.gen_params.contains_key(&bus.id) => {
                    return Err(GridError::MissingParams {
                        bus: bus.id,
                        role: bus.role,
                    });
                }
                BusRole::LccConnected if !self.lcc_params.contains_key(&bus.id) => {
                    return Err(GridError::MissingParams {
                        bus: bus.id,
                        role: bus.role,
                    });
                }
                _ => {}
            }
        }

        let mut pairs = BTreeSet::new();
        for line in &self.lines {
            Line::new(line.from, line.to, line.base_susceptance_pu)?;
            if line.from >= n || line.to >= n {
                return Err(GridError::InvalidLine {
                    from: line.from,
                    to: line.to,
                    reason: "endpoint is not a declared bus".into(),
                });
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !pairs.insert(key) {
                return Err(GridError::InvalidLine {
                    from: line.from,
                    to: line.to,
                    reason: "duplicate line for this bus pair".into(),
                });
            }
        }

        if n > 0 && !self.is_connected() {
            return Err(GridError::DisconnectedGraph);
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let mut adjacency = vec![Vec::new(); n];
        for line in &self.lines {
            adjacency[line.from].push(line.to);
            adjacency[line.to].push(line.from);
        }
        let mut visited = vec![false; n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adjacency[i] {
                if !visited[j] {
                    visited[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }

    /// Sum of all bus injections plus all nominal DC powers (the system
    /// imbalance `b`); zero for a balanced network.
    pub fn nominal_imbalance_pu(&self) -> f64 {
        let injections: f64 = self.buses.iter().map(|b| b.injection_pu).sum();
        let dc: f64 = self.lcc_params.values().map(|l| l.nominal_pu).sum();
        injections + dc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn three_bus() -> Network {
        let buses = vec![
            Bus {
                id: 0,
                role: BusRole::Generator,
                injection_pu: 1.5,
                voltage_pu: 1.0,
            },
            Bus {
                id: 1,
                role: BusRole::LccConnected,
                injection_pu: 0.0,
                voltage_pu: 1.0,
            },
            Bus {
                id: 2,
                role: BusRole::Passive,
                injection_pu: -6.5,
                voltage_pu: 1.0,
            },
        ];
        let lines = vec![
            Line::new(0, 1, 10.0).unwrap(),
            Line::new(1, 2, 10.0).unwrap(),
        ];
        let mut gen = BTreeMap::new();
        gen.insert(
            0,
            GeneratorParams {
                inertia: 10.0,
                damping: 0.5,
                governor_droop: 9.5,
                cost_beta: 0.1,
            },
        );
        let mut lcc = BTreeMap::new();
        lcc.insert(
            1,
            LccParams {
                nominal_pu: 5.0,
                max_pu: 6.5,
                min_pu: 4.0,
                time_constant_s: 0.1,
                alpha: Some(0.05),
                freq_reg_kf: Some(25.0),
                cost_e: Some(30.0),
                dc_voltage_kv: 500.0,
            },
        );
        build_network(buses, lines, gen, lcc, PerUnitBases::default()).unwrap()
    }

    #[test]
    fn minimal_three_bus_topology_builds() {
        let net = three_bus();
        assert_eq!(net.n(), 3);
        assert_eq!(net.generator_buses(), vec![0]);
        assert_eq!(net.lcc_buses(), vec![1]);
        assert_eq!(net.passive_buses(), vec![2]);
        assert_eq!(net.reference_bus(), 0);
        // Re-validation is idempotent and passes.
        net.validate().unwrap();
        net.validate().unwrap();
    }

    #[test]
    fn role_partition_is_exclusive() {
        let buses = vec![
            Bus {
                id: 0,
                role: BusRole::Generator,
                injection_pu: 1.0,
                voltage_pu: 1.0,
            },
            Bus {
                id: 0,
                role: BusRole::LccConnected,
                injection_pu: 0.0,
                voltage_pu: 1.0,
            },
        ];
        let err = build_network(
            buses,
            vec![],
            BTreeMap::new(),
            BTreeMap::new(),
            PerUnitBases::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GridError::RolePartitionViolation(0)));
    }

    #[test]
    fn disconnected_components_rejected() {
        let buses = vec![
            Bus {
                id: 0,
                role: BusRole::Generator,
                injection_pu: 1.0,
                voltage_pu: 1.0,
            },
            Bus {
                id: 1,
                role: BusRole::Passive,
                injection_pu: -1.0,
                voltage_pu: 1.0,
            },
            Bus {
                id: 2,
                role: BusRole::Passive,
                injection_pu: 0.0,
                voltage_pu: 1.0,
            },
            Bus {
                id: 3,
                role: BusRole::Passive,
                injection_pu: 0.0,
                voltage_pu: 1.0,
            },
        ];
        let lines = vec![
            Line::new(0, 1, 10.0).unwrap(),
            Line::new(2, 3, 10.0).unwrap(),
        ];
        let mut gen = BTreeMap::new();
        gen.insert(
            0,
            GeneratorParams {
                inertia: 10.0,
                damping: 0.5,
                governor_droop: 9.5,
                cost_beta: 0.1,
            },
        );
        let err =
            build_network(buses, lines, gen, BTreeMap::new(), PerUnitBases::default()).unwrap_err();
        assert!(matches!(err, GridError::DisconnectedGraph));
    }

    #[test]
    fn effective_susceptance_scales_with_voltages() {
        let mut net = three_bus();
        let line = net.lines()[0];
        assert_eq!(net.effective_susceptance(&line), 10.0);

        net.buses[0].voltage_pu = 1.05;
        net.buses[1].voltage_pu = 0.95;
        let line = net.lines()[0];
        assert!((net.effective_susceptance(&line) - 9.975).abs() < 1e-12);
    }

    #[test]
    fn effective_susceptance_is_symmetric() {
        let net = three_bus();
        for line in net.lines() {
            let flipped = Line::new(line.to(), line.from(), line.base_susceptance_pu()).unwrap();
            assert_eq!(
                net.effective_susceptance(line),
                net.effective_susceptance(&flipped)
            );
        }
    }

    #[test]
    fn zero_susceptance_rejected_at_construction() {
        assert!(Line::new(0, 1, 0.0).is_err());
        assert!(Line::new(0, 0, 10.0).is_err());
    }

    #[test]
    fn per_unit_conversions() {
        let bases = PerUnitBases::default();
        assert_eq!(bases.mw_to_pu(530.0), 5.3);
        assert_eq!(bases.hz_to_pu(0.2), 0.004);
        assert_eq!(bases.pu_to_frequency_hz(-0.003), 49.85);
    }
}
