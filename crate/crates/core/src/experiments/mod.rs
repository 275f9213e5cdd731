//! Declarative scenarios and the batch runner.
//!
//! A [`Scenario`] names a device, a wave packet, an optional control pulse
//! (single or amplitude sweep), the creation delays, the down-conversion
//! plans and the analyses to apply. [`run_scenario`] expands it into runs,
//! solves them in parallel and, given an output directory, writes
//!
//! ```text
//! <out>/<scenario>/{summary.csv, fits.txt, map.csv, white_line.csv, provenance.txt, config.toml}
//! <out>/<scenario>/<run-id>/{ports.csv, iq_*.csv, map.csv, inst.csv, fits.txt, provenance.txt}
//! ```
//!
//! The creation delay is `Δt = packet launch − control launch`.

mod catalog;
mod provenance;
mod runner;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use catalog::{builtin, builtin_catalog, BUILTIN_NAMES};
pub use provenance::{config_hash, run_hash};
pub use runner::{
    cross_validate, cross_validation, run_scenario, CrossValidation, CvRow, RunOptions, RunResult,
    ScenarioResult, WhitePoint,
};

use crate::ddc::FilterSpec;
use crate::error::{Error, Result};
use crate::fdtd::{PacketCoupling, DEFAULT_SHOCK_THRESHOLD, DEFAULT_SHOCK_VISCOSITY};
use crate::line::phase_velocity;
use crate::types::{ControlPulseSpec, EnvelopeSpec, LineSpec, WavePacketSpec};
use crate::units::{quantity, quantity_vec};

/// Time before the earlier of the two launches.
pub const LEAD_TIME: f64 = 2e-9;

/// Evenly spaced down-conversion frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqAxis {
    #[serde(with = "quantity")]
    pub start: f64,
    #[serde(with = "quantity")]
    pub stop: f64,
    pub points: usize,
}

impl FreqAxis {
    pub fn centred(centre: f64, half_span: f64, points: usize) -> Self {
        FreqAxis {
            start: centre - half_span,
            stop: centre + half_span,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        crate::analysis::linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DdcMode {
    /// Magnitude map over a frequency axis; the global shift is the parabola
    /// vertex at the time of strongest response.
    FreqSweep { axis: FreqAxis },
    /// Phase method at one down-conversion frequency. With `track`, `f_d` is
    /// only the starting point and is re-centred on the measured carrier.
    FixedFd {
        #[serde(with = "quantity")]
        f_d: f64,
        #[serde(default)]
        track: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisTag {
    /// Per-run global shift from every configured plan, next to the oracle.
    GlobalShift,
    /// Per-run Δf_inst(t) traces and the oracle's instantaneous profile.
    Instantaneous,
    /// Quadratic-plus-quartic fit of shift versus control amplitude.
    AmplitudeFit,
    /// Delay-stacked fixed-time cuts and the multi-packet averaged trace.
    DelayMerge,
    /// Envelope shape against a reference run without control pulse.
    EnvelopeCompare,
    /// Full output trace at the native rate, with its reference run.
    FullTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CpPlan {
    #[default]
    None,
    Single { pulse: ControlPulseSpec },
    AmplitudeSweep {
        pulse: ControlPulseSpec,
        #[serde(with = "quantity_vec")]
        amplitudes: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub shock_viscosity: f64,
    /// Viscosity threshold as a fraction of `I*` per cell.
    pub shock_threshold: f64,
    pub coupling: PacketCoupling,
    /// Simulated time after the packet's slowest possible exit.
    #[serde(with = "quantity")]
    pub tail: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            shock_viscosity: DEFAULT_SHOCK_VISCOSITY,
            shock_threshold: DEFAULT_SHOCK_THRESHOLD,
            coupling: PacketCoupling::default(),
            tail: 10e-9,
        }
    }
}

/// White measurement noise added to the output port before down-conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    /// Standard deviation in volts.
    #[serde(with = "quantity")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSettings {
    pub write_ports: bool,
    pub write_iq: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            write_ports: true,
            write_iq: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub line: LineSpec,
    /// Packet template; its own `delay` is ignored in favour of `delays`.
    pub wp: WavePacketSpec,
    #[serde(default)]
    pub cp: CpPlan,
    /// Creation delays `Δt = packet launch − control launch`.
    #[serde(with = "quantity_vec", default = "default_delays")]
    pub delays: Vec<f64>,
    /// Optional envelope axis; empty means `wp.envelope` only.
    #[serde(default)]
    pub envelopes: Vec<EnvelopeSpec>,
    pub ddc_plan: Vec<DdcMode>,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub analysis: Vec<AnalysisTag>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSettings>,
    #[serde(default)]
    pub output: OutputSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

fn default_delays() -> Vec<f64> {
    vec![0.0]
}

/// Coordinates of one run inside a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub index: usize,
    pub id: String,
    pub delay: f64,
    pub amplitude: Option<f64>,
    pub envelope: Option<usize>,
}

impl RunSpec {
    pub fn describe(&self) -> String {
        let mut s = format!("{} (delay {:.4e} s", self.id, self.delay);
        if let Some(a) = self.amplitude {
            s.push_str(&format!(", amplitude {a:.4e} A"));
        }
        if let Some(e) = self.envelope {
            s.push_str(&format!(", envelope {e}"));
        }
        s.push(')');
        s
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Writes the config with the description as a leading comment block.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for line in self.description.lines() {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        if !self.description.is_empty() {
            text.push('\n');
        }
        text.push_str(&self.to_toml()?);
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn has(&self, tag: AnalysisTag) -> bool {
        self.analysis.contains(&tag)
    }

    pub fn sweep_axis(&self) -> Option<&FreqAxis> {
        self.ddc_plan.iter().find_map(|m| match m {
            DdcMode::FreqSweep { axis } => Some(axis),
            _ => None,
        })
    }

    pub fn fixed_fd(&self) -> Option<(f64, bool)> {
        self.ddc_plan.iter().find_map(|m| match m {
            DdcMode::FixedFd { f_d, track } => Some((*f_d, *track)),
            _ => None,
        })
    }

    fn amplitudes(&self) -> Vec<Option<f64>> {
        match &self.cp {
            CpPlan::AmplitudeSweep { amplitudes, .. } => amplitudes.iter().map(|&a| Some(a)).collect(),
            _ => vec![None],
        }
    }

    /// Control pulse template, if any.
    pub fn pulse(&self) -> Option<&ControlPulseSpec> {
        match &self.cp {
            CpPlan::None => None,
            CpPlan::Single { pulse } | CpPlan::AmplitudeSweep { pulse, .. } => Some(pulse),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::validation("scenario name must be a non-empty plain file name"));
        }
        self.line.validate()?;
        self.wp.validate(&self.line)?;
        for e in &self.envelopes {
            e.validate()?;
        }
        if self.delays.is_empty() || self.delays.iter().any(|d| !d.is_finite()) {
            return Err(Error::validation("delays must be a non-empty list of finite values"));
        }
        if self.ddc_plan.is_empty() {
            return Err(Error::validation("ddc_plan needs at least one mode"));
        }
        for m in &self.ddc_plan {
            match m {
                DdcMode::FreqSweep { axis } => {
                    if axis.points < 5 || !(axis.stop > axis.start) || axis.start <= 0.0 {
                        return Err(Error::validation(
                            "frequency sweep needs at least 5 points over a positive, increasing range",
                        ));
                    }
                }
                DdcMode::FixedFd { f_d, .. } => {
                    if !(*f_d > 0.0) {
                        return Err(Error::validation("fixed f_d must be positive"));
                    }
                }
            }
        }
        let fs = 1.0 / self.line.magic_dt();
        crate::ddc::DdcPlan::new(fs, &self.filter)?;
        if let CpPlan::AmplitudeSweep { amplitudes, .. } = &self.cp {
            if amplitudes.is_empty() {
                return Err(Error::validation("amplitude sweep needs at least one amplitude"));
            }
        }
        for amp in self.amplitudes() {
            if let Some(cp) = self.pulse_with(amp, 0.0) {
                cp.validate(&self.line)?;
            }
        }
        if self.has(AnalysisTag::AmplitudeFit) && !matches!(self.cp, CpPlan::AmplitudeSweep { .. }) {
            return Err(Error::validation("amplitude_fit needs an amplitude sweep"));
        }
        if let Some(n) = &self.noise {
            if !(n.sigma >= 0.0) {
                return Err(Error::validation("noise sigma must be non-negative"));
            }
        }
        Ok(())
    }

    /// All runs: envelopes × amplitudes × delays, in that nesting order.
    pub fn runs(&self) -> Vec<RunSpec> {
        let envelopes: Vec<Option<usize>> = if self.envelopes.is_empty() {
            vec![None]
        } else {
            (0..self.envelopes.len()).map(Some).collect()
        };
        let delays: Vec<f64> = if self.pulse().is_some() {
            self.delays.clone()
        } else {
            vec![self.delays[0]]
        };
        let mut out = Vec::new();
        for &envelope in &envelopes {
            for amplitude in self.amplitudes() {
                for &delay in &delays {
                    let index = out.len();
                    out.push(RunSpec {
                        index,
                        id: format!("r{index:03}"),
                        delay,
                        amplitude,
                        envelope,
                    });
                }
            }
        }
        out
    }

    /// Replaces the control amplitude. An amplitude sweep collapses to a single
    /// pulse and drops the amplitude fit.
    pub fn with_cp_amplitude(mut self, amplitude: f64) -> Result<Self> {
        let pulse = self
            .pulse()
            .ok_or_else(|| Error::validation("scenario has no control pulse to override"))?
            .clone()
            .with_amplitude(amplitude);
        self.cp = CpPlan::Single { pulse };
        self.analysis.retain(|&a| a != AnalysisTag::AmplitudeFit);
        Ok(self)
    }

    /// Launch times `(packet, control)` for a creation delay.
    pub fn launch_times(&self, delay: f64) -> (f64, f64) {
        if self.pulse().is_none() {
            return (LEAD_TIME, LEAD_TIME);
        }
        let t_cp = LEAD_TIME + (-delay).max(0.0);
        (t_cp + delay, t_cp)
    }

    fn pulse_with(&self, amplitude: Option<f64>, t_cp: f64) -> Option<ControlPulseSpec> {
        let mut cp = self.pulse()?.clone();
        if let Some(a) = amplitude {
            cp = cp.with_amplitude(a);
        }
        Some(cp.with_delay(t_cp))
    }

    pub fn packet_for(&self, run: &RunSpec) -> WavePacketSpec {
        let (t_wp, _) = self.launch_times(run.delay);
        let mut wp = self.wp.clone().with_delay(t_wp);
        if let Some(e) = run.envelope {
            wp = wp.with_envelope(self.envelopes[e].clone());
        }
        wp
    }

    pub fn pulse_for(&self, run: &RunSpec) -> Option<ControlPulseSpec> {
        let (_, t_cp) = self.launch_times(run.delay);
        self.pulse_with(run.amplitude, t_cp)
    }

    /// Simulated time: the packet's slowest exit plus the configured tail.
    pub fn duration_for(&self, run: &RunSpec) -> Result<f64> {
        let wp = self.packet_for(run);
        let i_max = self.pulse_for(run).map_or(0.0, |c| c.peak_current());
        let v_min = phase_velocity(i_max, &self.line)?;
        Ok(wp.delay + wp.tau_wp + self.line.length / v_min + self.solver.tail)
    }
}
