//! Text format for combined network + scenario files.
//!
//! A file is a sequence of sections. `[network]` and `[control]` hold
//! `key = value` lines; the remaining sections hold one record per line,
//! a keyword followed by `field=value` tokens. Values are per-unit unless
//! the field name carries a unit suffix (`_mw`, `_hz`, `_s`, `_kv`).
//!
//! ```text
//! [network]
//! name = three_bus_minimal
//! power_base_mva = 100.0
//! nominal_frequency_hz = 50.0
//!
//! [generators]
//! gen bus=0 p=1.5 inertia=10.0 damping=0.5 governor_droop=9.5 beta=0.1
//!
//! [lccs]
//! lcc bus=1 p=0.0 p_nominal_mw=500 p_max_mw=650 p_min_mw=400 direction=import t_d_s=0.1 alpha=0.05 kf=25.0 e=30.0 u_dc_kv=500
//!
//! [buses]
//! bus id=2 p=-6.5
//!
//! [lines]
//! line from=0 to=1 b=10.0
//!
//! [events]
//! power_step t_s=2.0 bus=2 delta=-1.0
//!
//! [control]
//! objective = 1
//! droop = optimal
//! margin_direction = increase
//! dead_zone_hz = 0.0
//! horizon_s = 40.0
//! dt_s = 0.001
//! output_every_s = 0.01
//! ```
//!
//! LCC records accept either physical fields (`p_nominal_mw`, `p_max_mw`,
//! `p_min_mw` plus `direction=import|export`, all referring to the positive
//! rectifier power order) or the signed model-frame fields (`p_nominal`,
//! `p_max`, `p_min`, positive when the main system receives). Manual droop
//! overrides live in `[control]` as `k_g bus=.. value=..` and
//! `k_d bus=.. value=..` records.

use std::collections::BTreeMap;

use thiserror::Error;

use super::scenario::{DroopSelection, Event, EventKind, MarginDirection, Objective, Scenario};
use super::PerUnitBases;
use super::{build_network, Bus, BusRole, GeneratorParams, GridError, LccParams, Line, Network};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: reference to unknown bus {bus}")]
    UnknownBusReference { line: usize, bus: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A parsed file: validated network plus normalized scenario.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub network: Network,
    pub scenario: Scenario,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

/// One `field=value` token list with its source line.
struct Record<'a> {
    line: usize,
    keyword: &'a str,
    fields: Vec<(&'a str, &'a str)>,
}

impl<'a> Record<'a> {
    fn get(&self, name: &str) -> Option<&'a str> {
        self.fields
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
    }

    fn f64(&self, name: &str) -> Result<f64, ConfigError> {
        let raw = self
            .get(name)
            .ok_or_else(|| err(self.line, format!("missing field `{name}`")))?;
        raw.parse::<f64>()
            .map_err(|_| err(self.line, format!("field `{name}`: not a number: `{raw}`")))
    }

    fn f64_or(&self, name: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(name) {
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| err(self.line, format!("field `{name}`: not a number: `{raw}`"))),
            None => Ok(default),
        }
    }

    fn f64_opt(&self, name: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(name) {
            Some(raw) => raw
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(self.line, format!("field `{name}`: not a number: `{raw}`"))),
            None => Ok(None),
        }
    }

    fn usize(&self, name: &str) -> Result<usize, ConfigError> {
        let raw = self
            .get(name)
            .ok_or_else(|| err(self.line, format!("missing field `{name}`")))?;
        raw.parse::<usize>().map_err(|_| {
            err(
                self.line,
                format!("field `{name}`: not a bus index: `{raw}`"),
            )
        })
    }
}

fn parse_record(line_no: usize, line: &str) -> Result<Record<'_>, ConfigError> {
    let mut tokens = line.split_whitespace();
    let keyword = tokens.next().expect("caller skips blank lines");
    let mut fields = Vec::new();
    for token in tokens {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected field=value, got `{token}`")))?;
        fields.push((k, v));
    }
    Ok(Record {
        line: line_no,
        keyword,
        fields,
    })
}

#[derive(Default)]
struct RawSections<'a> {
    network: Vec<(usize, &'a str)>,
    generators: Vec<(usize, &'a str)>,
    lccs: Vec<(usize, &'a str)>,
    buses: Vec<(usize, &'a str)>,
    lines: Vec<(usize, &'a str)>,
    events: Vec<(usize, &'a str)>,
    control: Vec<(usize, &'a str)>,
}

fn split_sections(text: &str) -> Result<RawSections<'_>, ConfigError> {
    let mut sections = RawSections::default();
    let mut current: Option<&mut Vec<(usize, &str)>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = Some(match name {
                "network" => &mut sections.network,
                "generators" => &mut sections.generators,
                "lccs" => &mut sections.lccs,
                "buses" => &mut sections.buses,
                "lines" => &mut sections.lines,
                "events" => &mut sections.events,
                "control" => &mut sections.control,
                other => return Err(err(line_no, format!("unknown section `[{other}]`"))),
            });
            continue;
        }
        match current.as_deref_mut() {
            Some(section) => section.push((line_no, line)),
            None => return Err(err(line_no, "content before first section header")),
        }
    }
    Ok(sections)
}

fn parse_kv(line_no: usize, line: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| err(line_no, "expected `key = value`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Parses a complete system file into a validated network and scenario.
pub fn load_system(text: &str) -> Result<SystemSpec, ConfigError> {
    let sections = split_sections(text)?;

    let mut name = String::from("unnamed");
    let mut bases = PerUnitBases::default();
    for (line_no, line) in &sections.network {
        let (k, v) = parse_kv(*line_no, line)?;
        match k.as_str() {
            "name" => name = v,
            "power_base_mva" => {
                bases.power_base_mva = v
                    .parse()
                    .map_err(|_| err(*line_no, "power_base_mva: not a number"))?
            }
            "nominal_frequency_hz" => {
                bases.nominal_frequency_hz = v
                    .parse()
                    .map_err(|_| err(*line_no, "nominal_frequency_hz: not a number"))?
            }
            other => return Err(err(*line_no, format!("unknown [network] key `{other}`"))),
        }
    }

    let mut buses = Vec::new();
    let mut gen_params = BTreeMap::new();
    let mut lcc_params = BTreeMap::new();

    for (line_no, line) in &sections.generators {
        let record = parse_record(*line_no, line)?;
        if record.keyword != "gen" {
            return Err(err(*line_no, "expected `gen` record in [generators]"));
        }
        let bus = record.usize("bus")?;
        buses.push(Bus {
            id: bus,
            role: BusRole::Generator,
            injection_pu: record.f64("p")?,
            voltage_pu: record.f64_or("v", 1.0)?,
        });
        gen_params.insert(
            bus,
            GeneratorParams {
                inertia: record.f64("inertia")?,
                damping: record.f64("damping")?,
                governor_droop: record.f64("governor_droop")?,
                cost_beta: record.f64("beta")?,
            },
        );
    }

    for (line_no, line) in &sections.lccs {
        let record = parse_record(*line_no, line)?;
        if record.keyword != "lcc" {
            return Err(err(*line_no, "expected `lcc` record in [lccs]"));
        }
        let bus = record.usize("bus")?;
        buses.push(Bus {
            id: bus,
            role: BusRole::LccConnected,
            injection_pu: record.f64("p")?,
            voltage_pu: record.f64_or("v", 1.0)?,
        });
        let (nominal_pu, max_pu, min_pu) = if record.get("p_nominal_mw").is_some() {
            let nom = bases.mw_to_pu(record.f64("p_nominal_mw")?);
            let max = bases.mw_to_pu(record.f64("p_max_mw")?);
            let min = bases.mw_to_pu(record.f64("p_min_mw")?);
            match record.get("direction") {
                Some("import") | None => (nom, max, min),
                Some("export") => (-nom, -min, -max),
                Some(other) => {
                    return Err(err(
                        *line_no,
                        format!("direction must be import or export, got `{other}`"),
                    ))
                }
            }
        } else {
            (
                record.f64("p_nominal")?,
                record.f64("p_max")?,
                record.f64("p_min")?,
            )
        };
        if lcc_params
            .insert(
                bus,
                LccParams {
                    nominal_pu,
                    max_pu,
                    min_pu,
                    time_constant_s: record.f64("t_d_s")?,
                    alpha: record.f64_opt("alpha")?,
                    freq_reg_kf: record.f64_opt("kf")?,
                    cost_e: record.f64_opt("e")?,
                    dc_voltage_kv: record.f64_or("u_dc_kv", 500.0)?,
                },
            )
            .is_some()
        {
            return Err(GridError::DuplicateLccAttachment(bus).into());
        }
    }

    for (line_no, line) in &sections.buses {
        let record = parse_record(*line_no, line)?;
        if record.keyword != "bus" {
            return Err(err(*line_no, "expected `bus` record in [buses]"));
        }
        buses.push(Bus {
            id: record.usize("id")?,
            role: BusRole::Passive,
            injection_pu: record.f64("p")?,
            voltage_pu: record.f64_or("v", 1.0)?,
        });
    }

    buses.sort_by_key(|b| b.id);
    let n = buses.len();

    let mut lines = Vec::new();
    for (line_no, line) in &sections.lines {
        let record = parse_record(*line_no, line)?;
        if record.keyword != "line" {
            return Err(err(*line_no, "expected `line` record in [lines]"));
        }
        let from = record.usize("from")?;
        let to = record.usize("to")?;
        for bus in [from, to] {
            if bus >= n {
                return Err(ConfigError::UnknownBusReference {
                    line: *line_no,
                    bus,
                });
            }
        }
        lines.push(Line::new(from, to, record.f64("b")?)?);
    }

    let mut scenario = Scenario::new(name.clone());
    for (line_no, line) in &sections.events {
        let record = parse_record(*line_no, line)?;
        let bus = record.usize("bus")?;
        if bus >= n {
            return Err(ConfigError::UnknownBusReference {
                line: *line_no,
                bus,
            });
        }
        let kind = match record.keyword {
            "trip_generator" => EventKind::GeneratorTrip { bus },
            "block_dc" => EventKind::DcBlock { bus },
            "power_step" => EventKind::PowerStep {
                bus,
                delta_pu: record.f64("delta")?,
            },
            other => return Err(err(*line_no, format!("unknown event kind `{other}`"))),
        };
        scenario.events.push(Event {
            time_s: record.f64("t_s")?,
            kind,
        });
    }

    for (line_no, line) in &sections.control {
        if line.starts_with("k_g") || line.starts_with("k_d") {
            let record = parse_record(*line_no, line)?;
            let bus = record.usize("bus")?;
            if bus >= n {
                return Err(ConfigError::UnknownBusReference {
                    line: *line_no,
                    bus,
                });
            }
            let value = record.f64("value")?;
            match record.keyword {
                "k_g" => scenario.control.manual_gen.insert(bus, value),
                "k_d" => scenario.control.manual_lcc.insert(bus, value),
                _ => unreachable!(),
            };
            continue;
        }
        let (k, v) = parse_kv(*line_no, line)?;
        match k.as_str() {
            "objective" => {
                scenario.control.objective = match v.as_str() {
                    "1" | "margin" => Objective::RegulationMargin,
                    "2" | "adjacent" => Objective::AdjacentFrequency,
                    other => {
                        return Err(err(
                            *line_no,
                            format!("objective must be 1 or 2, got `{other}`"),
                        ))
                    }
                }
            }
            "droop" => {
                scenario.control.selection = match v.as_str() {
                    "optimal" => DroopSelection::Optimal,
                    "average" => DroopSelection::Average,
                    "manual" => DroopSelection::Manual,
                    other => {
                        return Err(err(
                            *line_no,
                            format!("droop must be optimal, average or manual, got `{other}`"),
                        ))
                    }
                }
            }
            "margin_direction" => {
                scenario.control.margin_direction = match v.as_str() {
                    "increase" => MarginDirection::Increase,
                    "decrease" => MarginDirection::Decrease,
                    other => {
                        return Err(err(
                            *line_no,
                            format!("margin_direction must be increase or decrease, got `{other}`"),
                        ))
                    }
                }
            }
            "dead_zone_hz" => {
                let hz: f64 = v
                    .parse()
                    .map_err(|_| err(*line_no, "dead_zone_hz: not a number"))?;
                scenario.control.dead_zone_pu = bases.hz_to_pu(hz);
            }
            "horizon_s" => {
                scenario.sim.horizon_s = v
                    .parse()
                    .map_err(|_| err(*line_no, "horizon_s: not a number"))?
            }
            "dt_s" => {
                scenario.sim.dt_s = v.parse().map_err(|_| err(*line_no, "dt_s: not a number"))?
            }
            "output_every_s" => {
                scenario.sim.output_every_s = v
                    .parse()
                    .map_err(|_| err(*line_no, "output_every_s: not a number"))?
            }
            other => return Err(err(*line_no, format!("unknown [control] key `{other}`"))),
        }
    }

    let network = build_network(buses, lines, gen_params, lcc_params, bases)?;
    scenario.normalize()?;
    scenario.validate_against(&network)?;

    Ok(SystemSpec {
        name,
        network,
        scenario,
    })
}

/// Parses a system file and returns only its scenario part. Bus references
/// are still validated against the `[generators]`/`[lccs]`/`[buses]`
/// sections of the same file.
pub fn load_scenario(text: &str) -> Result<Scenario, ConfigError> {
    load_system(text).map(|spec| spec.scenario)
}

fn push_lcc_record(out: &mut String, bus: usize, injection: f64, voltage: f64, p: &LccParams) {
    out.push_str(&format!(
        "lcc bus={bus} p={injection} v={voltage} p_nominal={} p_max={} p_min={} t_d_s={}",
        p.nominal_pu, p.max_pu, p.min_pu, p.time_constant_s
    ));
    if let Some(alpha) = p.alpha {
        out.push_str(&format!(" alpha={alpha}"));
    }
    if let Some(kf) = p.freq_reg_kf {
        out.push_str(&format!(" kf={kf}"));
    }
    if let Some(e) = p.cost_e {
        out.push_str(&format!(" e={e}"));
    }
    out.push_str(&format!(" u_dc_kv={}\n", p.dc_voltage_kv));
}

/// Serializes a system back to the text format. `load_system` on the output
/// reproduces an equal scenario and network.
pub fn to_config_text(spec: &SystemSpec) -> String {
    let network = &spec.network;
    let bases = network.bases();
    let mut out = String::new();
    out.push_str("[network]\n");
    out.push_str(&format!("name = {}\n", spec.name));
    out.push_str(&format!("power_base_mva = {}\n", bases.power_base_mva));
    out.push_str(&format!(
        "nominal_frequency_hz = {}\n",
        bases.nominal_frequency_hz
    ));

    out.push_str("\n[generators]\n");
    for bus in network.generator_buses() {
        let b = network.bus(bus);
        let p = network.generator_params(bus).expect("validated");
        out.push_str(&format!(
            "gen bus={bus} p={} v={} inertia={} damping={} governor_droop={} beta={}\n",
            b.injection_pu, b.voltage_pu, p.inertia, p.damping, p.governor_droop, p.cost_beta
        ));
    }

    out.push_str("\n[lccs]\n");
    for bus in network.lcc_buses() {
        let b = network.bus(bus);
        let p = network.lcc_params(bus).expect("validated");
        push_lcc_record(&mut out, bus, b.injection_pu, b.voltage_pu, p);
    }

    out.push_str("\n[buses]\n");
    for bus in network.passive_buses() {
        let b = network.bus(bus);
        out.push_str(&format!(
            "bus id={bus} p={} v={}\n",
            b.injection_pu, b.voltage_pu
        ));
    }

    out.push_str("\n[lines]\n");
    for line in network.lines() {
        out.push_str(&format!(
            "line from={} to={} b={}\n",
            line.from(),
            line.to(),
            line.base_susceptance_pu()
        ));
    }

    out.push_str("\n[events]\n");
    for event in &spec.scenario.events {
        match event.kind {
            EventKind::GeneratorTrip { bus } => {
                out.push_str(&format!("trip_generator t_s={} bus={bus}\n", event.time_s))
            }
            EventKind::DcBlock { bus } => {
                out.push_str(&format!("block_dc t_s={} bus={bus}\n", event.time_s))
            }
            EventKind::PowerStep { bus, delta_pu } => out.push_str(&format!(
                "power_step t_s={} bus={bus} delta={delta_pu}\n",
                event.time_s
            )),
        }
    }

    let control = &spec.scenario.control;
    let sim = &spec.scenario.sim;
    out.push_str("\n[control]\n");
    out.push_str(&format!(
        "objective = {}\n",
        match control.objective {
            Objective::RegulationMargin => "1",
            Objective::AdjacentFrequency => "2",
        }
    ));
    out.push_str(&format!(
        "droop = {}\n",
        match control.selection {
            DroopSelection::Optimal => "optimal",
            DroopSelection::Average => "average",
            DroopSelection::Manual => "manual",
        }
    ));
    out.push_str(&format!(
        "margin_direction = {}\n",
        match control.margin_direction {
            MarginDirection::Increase => "increase",
            MarginDirection::Decrease => "decrease",
        }
    ));
    out.push_str(&format!(
        "dead_zone_hz = {}\n",
        control.dead_zone_pu * bases.nominal_frequency_hz
    ));
    out.push_str(&format!("horizon_s = {}\n", sim.horizon_s));
    out.push_str(&format!("dt_s = {}\n", sim.dt_s));
    out.push_str(&format!("output_every_s = {}\n", sim.output_every_s));
    for (bus, value) in &control.manual_gen {
        out.push_str(&format!("k_g bus={bus} value={value}\n"));
    }
    for (bus, value) in &control.manual_lcc {
        out.push_str(&format!("k_d bus={bus} value={value}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bundled_fixture;

    #[test]
    fn three_bus_fixture_parses() {
        let spec = load_system(bundled_fixture("three_bus_minimal").unwrap()).unwrap();
        assert_eq!(spec.network.n(), 3);
        assert_eq!(spec.network.generator_buses(), vec![0]);
        assert_eq!(spec.network.lcc_buses(), vec![1]);
        assert!(spec.scenario.events.is_empty());
    }

    #[test]
    fn g6_trip_fixture_has_one_event_at_8s() {
        let scenario = load_scenario(bundled_fixture("g6_trip").unwrap()).unwrap();
        assert_eq!(scenario.events.len(), 1);
        assert_eq!(scenario.events[0].time_s, 8.0);
        assert!(matches!(
            scenario.events[0].kind,
            EventKind::GeneratorTrip { .. }
        ));
    }

    #[test]
    fn empty_event_list_is_a_plain_run() {
        let scenario = load_scenario(bundled_fixture("new_england_midc").unwrap()).unwrap();
        assert!(scenario.events.is_empty());
        assert!(scenario.sim.horizon_s > 0.0);
    }

    #[test]
    fn unknown_bus_reference_in_event() {
        let mut text = bundled_fixture("three_bus_minimal").unwrap().to_string();
        text.push_str("\n[events]\npower_step t_s=1.0 bus=99 delta=-1.0\n");
        match load_scenario(&text) {
            Err(ConfigError::UnknownBusReference { bus: 99, .. }) => {}
            other => panic!("expected UnknownBusReference, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "[network]\nname = x\nbogus_line_without_equals\n";
        match load_system(text) {
            Err(ConfigError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error on line 3, got {other:?}"),
        }
    }

    #[test]
    fn scenario_round_trip() {
        for name in crate::grid::bundled_fixture_names() {
            let spec = load_system(bundled_fixture(name).unwrap()).unwrap();
            let text = to_config_text(&spec);
            let reparsed = load_system(&text).unwrap();
            assert_eq!(spec.scenario, reparsed.scenario, "fixture {name}");
            assert_eq!(spec.network.n(), reparsed.network.n());
            for (a, b) in spec
                .network
                .buses()
                .iter()
                .zip(reparsed.network.buses().iter())
            {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn export_direction_flips_model_frame() {
        let text = "\
[network]
name = t
[generators]
gen bus=0 p=5.0 inertia=10 damping=0.5 governor_droop=9.5 beta=0.1
[lccs]
lcc bus=1 p=0.0 p_nominal_mw=500 p_max_mw=600 p_min_mw=400 direction=export t_d_s=0.1 alpha=0.05
[lines]
line from=0 to=1 b=10
[control]
horizon_s = 1.0
";
        let spec = load_system(text).unwrap();
        let lcc = spec.network.lcc_params(1).unwrap();
        assert_eq!(lcc.nominal_pu, -5.0);
        assert_eq!(lcc.max_pu, -4.0);
        assert_eq!(lcc.min_pu, -6.0);
        assert!(!lcc.main_is_receiving());
    }
}
