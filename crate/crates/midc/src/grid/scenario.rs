//! Scenario description: timed events plus controller configuration.

use std::collections::BTreeMap;

use super::{BusRole, GridError, Network};

/// A disturbance applied at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// The generator at `bus` is disconnected; the bus becomes passive with
    /// zero local injection.
    GeneratorTrip { bus: usize },
    /// The LCC link at `bus` blocks: DC power drops to zero and its droop
    /// controller is disabled.
    DcBlock { bus: usize },
    /// Step change of the local injection at `bus`.
    PowerStep { bus: usize, delta_pu: f64 },
}

impl EventKind {
    pub fn bus(&self) -> usize {
        match self {
            EventKind::GeneratorTrip { bus }
            | EventKind::DcBlock { bus }
            | EventKind::PowerStep { bus, .. } => *bus,
        }
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventKind::GeneratorTrip { bus } => write!(f, "trip_generator bus={bus}"),
            EventKind::DcBlock { bus } => write!(f, "block_dc bus={bus}"),
            EventKind::PowerStep { bus, delta_pu } => {
                write!(f, "power_step bus={bus} delta={delta_pu}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
}

/// Allocation objective used when deriving droop coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Links with a larger power regulation margin take more of the imbalance.
    RegulationMargin,
    /// Adjacent AC systems see equal frequency deviations; links attached to
    /// systems with a larger primary regulation coefficient take more.
    AdjacentFrequency,
}

/// Which droop coefficients the run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DroopSelection {
    /// Closed-form optimal coefficients for the configured objective.
    Optimal,
    /// Class-wise arithmetic means of the optimal coefficients.
    Average,
    /// Explicit per-unit overrides; unlisted LCCs get zero droop and
    /// unlisted generators keep their governor + damping value.
    Manual,
}

/// Which regulation margin enters the coefficient design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginDirection {
    /// Injection into the main system must increase (generation-loss events).
    Increase,
    /// Injection must decrease (load-loss events).
    Decrease,
}

/// Controller configuration carried by the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    /// Dead-zone threshold as p.u. frequency deviation; 0 disables the band.
    pub dead_zone_pu: f64,
    pub objective: Objective,
    pub selection: DroopSelection,
    pub margin_direction: MarginDirection,
    /// Manual effective generator droop overrides, bus -> kᴳ.
    pub manual_gen: BTreeMap<usize, f64>,
    /// Manual LCC droop overrides, bus -> kᴰ.
    pub manual_lcc: BTreeMap<usize, f64>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            dead_zone_pu: 0.0,
            objective: Objective::RegulationMargin,
            selection: DroopSelection::Optimal,
            margin_direction: MarginDirection::Increase,
            manual_gen: BTreeMap::new(),
            manual_lcc: BTreeMap::new(),
        }
    }
}

/// Integration horizon and step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub horizon_s: f64,
    pub dt_s: f64,
    pub output_every_s: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            horizon_s: 40.0,
            dt_s: 1e-3,
            output_every_s: 1e-2,
        }
    }
}

/// Timed event list plus controller configuration for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub events: Vec<Event>,
    pub control: ControlConfig,
    pub sim: SimParams,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            events: Vec::new(),
            control: ControlConfig::default(),
            sim: SimParams::default(),
        }
    }

    /// Sorts events by time and checks scenario-local invariants.
    pub fn normalize(&mut self) -> Result<(), GridError> {
        if self.events.iter().any(|e| e.time_s < 0.0) {
            return Err(GridError::InvalidParameter {
                context: "event times must be non-negative".into(),
            });
        }
        if self.control.dead_zone_pu < 0.0 {
            return Err(GridError::InvalidParameter {
                context: "dead-zone threshold must be non-negative".into(),
            });
        }
        if !(self.sim.dt_s > 0.0 && self.sim.horizon_s >= 0.0 && self.sim.output_every_s > 0.0) {
            return Err(GridError::InvalidParameter {
                context: "simulation horizon and steps must be positive".into(),
            });
        }
        self.events
            .sort_by(|a, b| a.time_s.partial_cmp(&b.time_s).unwrap());
        Ok(())
    }

    /// Checks event and override references against a network.
    pub fn validate_against(&self, network: &Network) -> Result<(), GridError> {
        for event in &self.events {
            let bus = event.kind.bus();
            if bus >= network.n() {
                return Err(GridError::UnknownBus(bus));
            }
            let role = network.bus(bus).role;
            match event.kind {
                EventKind::GeneratorTrip { .. } if role != BusRole::Generator => {
                    return Err(GridError::InvalidParameter {
                        context: format!(
                            "trip_generator targets bus {bus} which is not a generator"
                        ),
                    });
                }
                EventKind::DcBlock { .. } if role != BusRole::LccConnected => {
                    return Err(GridError::InvalidParameter {
                        context: format!("block_dc targets bus {bus} which has no LCC"),
                    });
                }
                _ => {}
            }
        }
        for &bus in self.control.manual_gen.keys() {
            if bus >= network.n() || network.bus(bus).role != BusRole::Generator {
                return Err(GridError::UnknownBus(bus));
            }
        }
        for &bus in self.control.manual_lcc.keys() {
            if bus >= network.n() || network.bus(bus).role != BusRole::LccConnected {
                return Err(GridError::UnknownBus(bus));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_sorts_events() {
        let mut scenario = Scenario::new("t");
        scenario.events = vec![
            Event {
                time_s: 8.0,
                kind: EventKind::PowerStep {
                    bus: 0,
                    delta_pu: -1.0,
                },
            },
            Event {
                time_s: 2.0,
                kind: EventKind::PowerStep {
                    bus: 0,
                    delta_pu: 1.0,
                },
            },
        ];
        scenario.normalize().unwrap();
        assert!(scenario.events[0].time_s < scenario.events[1].time_s);
    }

    #[test]
    fn negative_event_time_rejected() {
        let mut scenario = Scenario::new("t");
        scenario.events.push(Event {
            time_s: -1.0,
            kind: EventKind::PowerStep {
                bus: 0,
                delta_pu: -1.0,
            },
        });
        assert!(scenario.normalize().is_err());
    }
}
