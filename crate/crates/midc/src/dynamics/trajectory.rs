//! Sampled simulation output and its delimited-text export.

use super::model::SimModel;
use crate::grid::PerUnitBases;

/// One output sample with derived quantities.
#[derive(Debug, Clone)]
pub struct Sample {
    pub time_s: f64,
    pub omega_pu: Vec<f64>,
    pub theta_rad: Vec<f64>,
    /// Signed DC power per LCC unit.
    pub pdc_pu: Vec<f64>,
    pub saturated: Vec<bool>,
    /// Droop regulation −kᴳω per original generator bus (zero once tripped).
    pub u_gen_pu: Vec<f64>,
    /// Line flows −Bᵢⱼ sin(θᵢ−θⱼ) per line.
    pub flow_pu: Vec<f64>,
}

/// A uniformly sampled trajectory with event markers.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub gen_buses: Vec<usize>,
    pub lcc_buses: Vec<usize>,
    /// (from, to, effective susceptance) per line.
    pub lines: Vec<(usize, usize, f64)>,
    pub samples: Vec<Sample>,
    pub events: Vec<(f64, String)>,
    /// Set when integration terminated early; samples cover the run so far.
    pub failure: Option<String>,
    pub dt_s: f64,
    pub output_every_s: f64,
    pub bases: PerUnitBases,
}

impl Trajectory {
    pub(crate) fn new(model: &SimModel, dt_s: f64, output_every_s: f64) -> Self {
        Self {
            gen_buses: model.gens.iter().map(|g| g.bus).collect(),
            lcc_buses: model.lccs.iter().map(|l| l.bus).collect(),
            lines: model.lines.clone(),
            samples: Vec::new(),
            events: Vec::new(),
            failure: None,
            dt_s,
            output_every_s,
            bases: model.bases,
        }
    }

    pub fn terminal(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    /// Mean frequency deviation over all buses of one sample, the reported
    /// "system frequency".
    pub fn system_omega_pu(sample: &Sample) -> f64 {
        sample.omega_pu.iter().sum::<f64>() / sample.omega_pu.len() as f64
    }

    /// Time of the last event, or 0 when the run had none.
    pub fn last_event_time_s(&self) -> f64 {
        self.events.last().map(|(t, _)| *t).unwrap_or(0.0)
    }

    /// Samples at or after the given time.
    pub fn samples_from(&self, time_s: f64) -> &[Sample] {
        let start = self
            .samples
            .iter()
            .position(|s| s.time_s >= time_s - 1e-9)
            .unwrap_or(self.samples.len());
        &self.samples[start..]
    }

    /// CSV export: one row per sample with per-bus frequencies and angles,
    /// per-LCC DC power and saturation flag, and per-generator regulation.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map(|s| s.omega_pu.len()).unwrap_or(0);
        let mut out = String::new();
        out.push_str("time_s");
        for i in 0..n {
            out.push_str(&format!(",omega_pu_bus{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",theta_rad_bus{i}"));
        }
        for bus in &self.lcc_buses {
            out.push_str(&format!(",pdc_pu_lcc{bus},sat_lcc{bus}"));
        }
        for bus in &self.gen_buses {
            out.push_str(&format!(",ug_pu_gen{bus}"));
        }
        out.push('\n');
        for sample in &self.samples {
            out.push_str(&format!("{:.4}", sample.time_s));
            for v in &sample.omega_pu {
                out.push_str(&format!(",{v:.8e}"));
            }
            for v in &sample.theta_rad {
                out.push_str(&format!(",{v:.8e}"));
            }
            for (p, s) in sample.pdc_pu.iter().zip(&sample.saturated) {
                out.push_str(&format!(",{p:.8e},{}", u8::from(*s)));
            }
            for v in &sample.u_gen_pu {
                out.push_str(&format!(",{v:.8e}"));
            }
            out.push('\n');
        }
        out
    }
}
