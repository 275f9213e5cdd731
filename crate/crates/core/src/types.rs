//! Shared domain types: the line, sampled waveforms, and stimulus descriptions.
//!
//! All fields are SI. The serde representations double as the config-file schema,
//! where every physical quantity may also be written with a unit suffix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{quantity, quantity_vec};

/// Default device: 40 ns delay, 50 Ω, 0.24 m, I* = 6.15 mA, I_c = 2.5 mA.
pub const DEFAULT_TAU_P: f64 = 40e-9;
pub const DEFAULT_Z0: f64 = 50.0;
pub const DEFAULT_LENGTH: f64 = 0.24;
pub const DEFAULT_I_STAR: f64 = 6.15e-3;
pub const DEFAULT_I_CRIT: f64 = 2.5e-3;
pub const DEFAULT_N_CELLS: usize = 6400;
/// Default wave-packet current amplitude (0.01 mA).
pub const DEFAULT_WP_AMPLITUDE: f64 = 1e-5;
/// Default control-pulse edge duration.
pub const DEFAULT_EDGE: f64 = 0.2e-9;
/// Raised-cosine taper on each end of a wave packet's envelope. An ideal
/// step puts the carrier image's sidelobes into the down-converted band,
/// which biases frequency estimates of a 15 ns packet by about 0.1 MHz.
pub const DEFAULT_WP_TAPER: f64 = 0.5e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LineModel {
    /// L(I) = L0 (1 + I²/I*² + c4 I⁴/I*⁴)
    #[default]
    KineticInductance,
    /// L(I) = L0 / sqrt(1 - (I/I_c)²), i.e. v ∝ [1 - (I/I_c)²]^(1/4)
    JosephsonChain,
}

/// Distributed parameters of a uniform current-tunable line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    /// Inductance per unit length at zero current (H/m).
    #[serde(with = "quantity")]
    pub l0: f64,
    /// Capacitance per unit length (F/m).
    #[serde(with = "quantity")]
    pub c: f64,
    #[serde(with = "quantity")]
    pub length: f64,
    /// Nonlinearity scale current.
    #[serde(with = "quantity")]
    pub i_star: f64,
    #[serde(with = "quantity")]
    pub i_crit: f64,
    #[serde(default)]
    pub c4: f64,
    #[serde(default)]
    pub model: LineModel,
    pub n_cells: usize,
}

impl LineSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l0", self.l0),
            ("c", self.c),
            ("length", self.length),
            ("i_star", self.i_star),
            ("i_crit", self.i_crit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("line {name} must be positive, got {v}")));
            }
        }
        if !self.c4.is_finite() {
            return Err(Error::validation("line c4 must be finite"));
        }
        if self.n_cells < 16 {
            return Err(Error::validation(format!(
                "line n_cells must be >= 16, got {}",
                self.n_cells
            )));
        }
        if self.model == LineModel::KineticInductance && self.i_crit >= self.i_star {
            return Err(Error::validation(format!(
                "kinetic-inductance line needs i_crit < i_star ({} >= {})",
                self.i_crit, self.i_star
            )));
        }
        Ok(())
    }

    /// One-way propagation time at zero current.
    pub fn tau_p(&self) -> f64 {
        self.length * (self.l0 * self.c).sqrt()
    }

    /// Characteristic impedance at zero current.
    pub fn z0(&self) -> f64 {
        (self.l0 / self.c).sqrt()
    }

    /// Phase velocity at zero current.
    pub fn v0(&self) -> f64 {
        1.0 / (self.l0 * self.c).sqrt()
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    /// Time step at which zero-current propagation is exact on the staggered grid.
    pub fn magic_dt(&self) -> f64 {
        self.dx() * (self.l0 * self.c).sqrt()
    }

    pub fn with_n_cells(mut self, n_cells: usize) -> Self {
        self.n_cells = n_cells;
        self
    }

    pub fn with_c4(mut self, c4: f64) -> Self {
        self.c4 = c4;
        self
    }

    pub fn with_model(mut self, model: LineModel) -> Self {
        self.model = model;
        self
    }
}

impl Default for LineSpec {
    fn default() -> Self {
        line_from_delay(
            DEFAULT_TAU_P,
            DEFAULT_Z0,
            DEFAULT_LENGTH,
            DEFAULT_I_STAR,
            DEFAULT_I_CRIT,
        )
        .expect("default device parameters are valid")
    }
}

/// Builds a line from its measurable delay and impedance.
///
/// `l0 = z0·τ/ℓ` and `c = τ/(z0·ℓ)`, so `τ_p` and `Z0` round-trip.
pub fn line_from_delay(
    tau_p: f64,
    z0: f64,
    length: f64,
    i_star: f64,
    i_crit: f64,
) -> Result<LineSpec> {
    for (name, v) in [
        ("tau_p", tau_p),
        ("z0", z0),
        ("length", length),
        ("i_star", i_star),
        ("i_crit", i_crit),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    let line = LineSpec {
        l0: z0 * tau_p / length,
        c: tau_p / (z0 * length),
        length,
        i_star,
        i_crit,
        c4: 0.0,
        model: LineModel::KineticInductance,
        n_cells: DEFAULT_N_CELLS,
    };
    line.validate()?;
    Ok(line)
}

/// Uniformly sampled real time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    #[serde(with = "quantity")]
    pub sample_rate: f64,
    #[serde(with = "quantity", default)]
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        let w = Waveform {
            sample_rate,
            t0,
            samples,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::validation(format!(
                "waveform sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !self.t0.is_finite() {
            return Err(Error::validation("waveform t0 must be finite"));
        }
        if self.samples.is_empty() {
            return Err(Error::validation("waveform has no samples"));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("waveform sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.time_at(i))
    }

    /// Span covered by the samples, `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn t_end(&self) -> f64 {
        self.time_at(self.samples.len() - 1)
    }

    /// Linear interpolation; zero outside the sampled span.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.t0) * self.sample_rate;
        let n = self.samples.len();
        if !(x >= 0.0) || x > (n - 1) as f64 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= n {
            return self.samples[n - 1];
        }
        let f = x - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.sample_rate
    }

    /// Resamples by linear interpolation; output length is `round(duration·new_rate)`.
    pub fn resample(&self, new_rate: f64) -> Result<Waveform> {
        if !(new_rate.is_finite() && new_rate > 0.0) {
            return Err(Error::validation("resample rate must be positive"));
        }
        let n = (self.duration() * new_rate).round().max(1.0) as usize;
        let samples = (0..n)
            .map(|i| self.value_at(self.t0 + i as f64 / new_rate))
            .collect();
        Waveform::new(new_rate, self.t0, samples)
    }

    pub fn shifted(mut self, dt: f64) -> Waveform {
        self.t0 += dt;
        self
    }

    pub fn scaled(mut self, k: f64) -> Waveform {
        self.samples.iter_mut().for_each(|v| *v *= k);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    #[default]
    Left,
    Right,
}

impl Port {
    pub fn opposite(self) -> Port {
        match self {
            Port::Left => Port::Right,
            Port::Right => Port::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeSpec {
    Rectangular,
    /// Equal-duration plateaus at the given relative levels.
    Staircase { levels: Vec<f64> },
    /// Centred at τ/2.
    Gaussian {
        #[serde(with = "quantity")]
        sigma: f64,
    },
    /// Linearly interpolated table, stretched onto [0, τ) and normalised to peak 1.
    Table { waveform: Waveform },
}

impl EnvelopeSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvelopeSpec::Rectangular => Ok(()),
            EnvelopeSpec::Staircase { levels } => {
                if levels.is_empty() {
                    return Err(Error::validation("staircase needs at least one level"));
                }
                if levels.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                    return Err(Error::validation("staircase levels must lie in (0, 1]"));
                }
                Ok(())
            }
            EnvelopeSpec::Gaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::validation("gaussian sigma must be positive"));
                }
                Ok(())
            }
            EnvelopeSpec::Table { waveform } => {
                waveform.validate()?;
                if waveform.len() < 2 {
                    return Err(Error::validation("envelope table needs >= 2 points"));
                }
                if waveform.samples.iter().any(|&v| v < 0.0) || waveform.peak_abs() <= 0.0 {
                    return Err(Error::validation(
                        "envelope table must be non-negative with a positive peak",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Small microwave wave packet injected at one port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    /// Carrier angular frequency (rad/s).
    #[serde(with = "quantity")]
    pub omega_in: f64,
    #[serde(with = "quantity")]
    pub tau_wp: f64,
    /// Peak current at injection.
    #[serde(with = "quantity")]
    pub amplitude: f64,
    pub envelope: EnvelopeSpec,
    #[serde(default)]
    pub port: Port,
    #[serde(with = "quantity", default)]
    pub delay: f64,
    /// Rise and fall time of the raised-cosine envelope taper; 0 keeps
    /// ideal steps.
    #[serde(with = "quantity", default = "default_taper")]
    pub taper: f64,
}

fn default_taper() -> f64 {
    DEFAULT_WP_TAPER
}

impl WavePacketSpec {
    /// Rectangular packet at `f_in` (Hz) with the default amplitude.
    pub fn rectangular(f_in: f64, tau_wp: f64) -> Self {
        WavePacketSpec {
            omega_in: 2.0 * std::f64::consts::PI * f_in,
            tau_wp,
            amplitude: DEFAULT_WP_AMPLITUDE,
            envelope: EnvelopeSpec::Rectangular,
            port: Port::Left,
            delay: 0.0,
            taper: DEFAULT_WP_TAPER,
        }
    }

    pub fn f_in(&self) -> f64 {
        self.omega_in / (2.0 * std::f64::consts::PI)
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_envelope(mut self, envelope: EnvelopeSpec) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn with_port(mut self, port: Port) -> Self {
        self.port = port;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_taper(mut self, taper: f64) -> Self {
        self.taper = taper;
        self
    }

    pub fn validate(&self, line: &LineSpec) -> Result<()> {
        if !(self.omega_in.is_finite() && self.omega_in > 0.0) {
            return Err(Error::validation("wave packet omega_in must be positive"));
        }
        if !(self.tau_wp.is_finite() && self.tau_wp > 0.0) {
            return Err(Error::validation("wave packet tau_wp must be positive"));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::validation("wave packet amplitude must be positive"));
        }
        if self.amplitude > 0.05 * line.i_star {
            return Err(Error::validation(format!(
                "wave packet amplitude {:.3e} A exceeds 5% of i_star; it would self-modulate",
                self.amplitude
            )));
        }
        if !self.delay.is_finite() {
            return Err(Error::validation("wave packet delay must be finite"));
        }
        if !(self.taper >= 0.0 && 2.0 * self.taper <= self.tau_wp) {
            return Err(Error::validation(
                "wave packet taper must be non-negative and at most half of tau_wp",
            ));
        }
        self.envelope.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeShape {
    #[default]
    Linear,
    /// 3s² − 2s³
    Smoothstep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlShape {
    /// `duration` spans from the start of the rise to the end of the fall.
    Rect {
        #[serde(with = "quantity")]
        amplitude: f64,
        #[serde(with = "quantity")]
        duration: f64,
        #[serde(with = "quantity", default = "default_edge")]
        rise: f64,
        #[serde(with = "quantity", default = "default_edge")]
        fall: f64,
        #[serde(default)]
        edge: EdgeShape,
    },
    /// Current table (A) versus time relative to the pulse delay.
    Arbitrary { waveform: Waveform },
    /// Piecewise-constant levels of equal or given duration joined by edges.
    Staircase {
        #[serde(with = "quantity_vec")]
        levels: Vec<f64>,
        #[serde(with = "quantity")]
        step: f64,
        #[serde(with = "quantity", default = "default_edge")]
        edge_time: f64,
        #[serde(default)]
        edge: EdgeShape,
    },
}

fn default_edge() -> f64 {
    DEFAULT_EDGE
}

/// Large quasi-dc current pulse whose edges act as moving phase-velocity fronts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulseSpec {
    pub shape: ControlShape,
    #[serde(default = "default_cp_port")]
    pub port: Port,
    #[serde(with = "quantity", default)]
    pub delay: f64,
}

fn default_cp_port() -> Port {
    Port::Right
}

impl ControlPulseSpec {
    /// Rectangular pulse at the right port with default linear 0.2 ns edges.
    pub fn rect(amplitude: f64, duration: f64) -> Self {
        ControlPulseSpec {
            shape: ControlShape::Rect {
                amplitude,
                duration,
                rise: DEFAULT_EDGE,
                fall: DEFAULT_EDGE,
                edge: EdgeShape::Linear,
            },
            port: Port::Right,
            delay: 0.0,
        }
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_port(mut self, port: Port) -> Self {
        self.port = port;
        self
    }

    pub fn with_edges(mut self, rise_time: f64, fall_time: f64, shape: EdgeShape) -> Self {
        if let ControlShape::Rect {
            rise, fall, edge, ..
        } = &mut self.shape
        {
            *rise = rise_time;
            *fall = fall_time;
            *edge = shape;
        }
        self
    }

    pub fn with_amplitude(mut self, new_amplitude: f64) -> Self {
        match &mut self.shape {
            ControlShape::Rect { amplitude, .. } => *amplitude = new_amplitude,
            ControlShape::Staircase { levels, .. } => {
                let peak = levels.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak > 0.0 {
                    levels.iter_mut().for_each(|l| *l *= new_amplitude / peak);
                }
            }
            ControlShape::Arbitrary { waveform } => {
                let peak = waveform.peak_abs();
                if peak > 0.0 {
                    waveform
                        .samples
                        .iter_mut()
                        .for_each(|s| *s *= new_amplitude / peak);
                }
            }
        }
        self
    }

    /// Largest |current| the pulse reaches.
    pub fn peak_current(&self) -> f64 {
        match &self.shape {
            ControlShape::Rect { amplitude, .. } => amplitude.abs(),
            ControlShape::Arbitrary { waveform } => waveform.peak_abs(),
            ControlShape::Staircase { levels, .. } => {
                levels.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Total time from start to end of the pulse.
    pub fn duration(&self) -> f64 {
        match &self.shape {
            ControlShape::Rect { duration, .. } => *duration,
            ControlShape::Arbitrary { waveform } => waveform.t0 + waveform.duration(),
            ControlShape::Staircase {
                levels,
                step,
                edge_time,
                ..
            } => levels.len() as f64 * step + edge_time,
        }
    }

    pub fn validate(&self, line: &LineSpec) -> Result<()> {
        if !self.delay.is_finite() {
            return Err(Error::validation("control pulse delay must be finite"));
        }
        match &self.shape {
            ControlShape::Rect {
                amplitude,
                duration,
                rise,
                fall,
                ..
            } => {
                if !amplitude.is_finite() || *amplitude < 0.0 {
                    return Err(Error::validation("control pulse amplitude must be >= 0"));
                }
                if *rise < 0.0 || *fall < 0.0 {
                    return Err(Error::validation("control pulse edges must be >= 0"));
                }
                if !(*duration > rise + fall) {
                    return Err(Error::validation(format!(
                        "control pulse duration {duration:.3e} s must exceed rise + fall"
                    )));
                }
            }
            ControlShape::Arbitrary { waveform } => waveform.validate()?,
            ControlShape::Staircase {
                levels,
                step,
                edge_time,
                ..
            } => {
                if levels.is_empty() {
                    return Err(Error::validation("control staircase needs levels"));
                }
                if levels.iter().any(|l| !l.is_finite()) {
                    return Err(Error::validation("control staircase levels must be finite"));
                }
                if !(*step > *edge_time && *edge_time >= 0.0) {
                    return Err(Error::validation(
                        "control staircase step must exceed its edge time",
                    ));
                }
            }
        }
        let peak = self.peak_current();
        if peak >= line.i_crit {
            return Err(Error::CriticalCurrentExceeded {
                current: peak,
                i_crit: line.i_crit,
                at_step: None,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn default_device_from_delay() {
        let line = line_from_delay(40e-9, 50.0, 0.24, 6.15e-3, 2.5e-3).unwrap();
        // l0 = 50·40e-9/0.24, c = 40e-9/(50·0.24)
        assert_relative_eq!(line.l0, 8.333_333_333e-6, max_relative = 1e-9);
        assert_relative_eq!(line.c, 3.333_333_333e-9, max_relative = 1e-9);
        assert_relative_eq!(line.tau_p(), 40e-9, max_relative = 1e-15);
        assert_relative_eq!(line.z0(), 50.0, max_relative = 1e-15);
    }

    #[test]
    fn unit_identity() {
        let line = line_from_delay(1.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(line.l0, 1.0);
        assert_eq!(line.c, 1.0);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(line_from_delay(0.0, 50.0, 0.24, 6.15e-3, 2.5e-3).is_err());
        assert!(line_from_delay(40e-9, -50.0, 0.24, 6.15e-3, 2.5e-3).is_err());
        assert!(line_from_delay(40e-9, 50.0, 0.24, 6.15e-3, 7e-3).is_err());
        let mut line = LineSpec::default();
        line.n_cells = 8;
        assert!(line.validate().is_err());
    }

    #[test]
    fn josephson_chain_allows_any_i_crit() {
        let line = LineSpec {
            i_crit: 10e-3,
            model: LineModel::JosephsonChain,
            ..LineSpec::default()
        };
        assert!(line.validate().is_ok());
    }

    #[test]
    fn resample_length_contract() {
        let w = Waveform::new(1e9, 0.0, vec![1.0; 1000]).unwrap();
        let r = w.resample(3.3e9).unwrap();
        assert_eq!(r.len(), (w.duration() * 3.3e9).round() as usize);
    }

    #[test]
    fn waveform_rejects_nan() {
        assert!(Waveform::new(1.0, 0.0, vec![1.0, f64::NAN]).is_err());
        assert!(Waveform::new(1.0, 0.0, vec![]).is_err());
        assert!(Waveform::new(0.0, 0.0, vec![1.0]).is_err());
    }

    #[test]
    fn control_pulse_limits() {
        let line = LineSpec::default();
        assert!(ControlPulseSpec::rect(1.62e-3, 30e-9).validate(&line).is_ok());
        let err = ControlPulseSpec::rect(3.0e-3, 30e-9).validate(&line).unwrap_err();
        assert!(matches!(err, Error::CriticalCurrentExceeded { .. }));
        assert!(ControlPulseSpec::rect(1e-3, 0.3e-9).validate(&line).is_err());
    }

    #[test]
    fn wave_packet_amplitude_bound() {
        let line = LineSpec::default();
        let wp = WavePacketSpec::rectangular(4e9, 15e-9);
        assert!(wp.validate(&line).is_ok());
        assert!(wp.clone().with_amplitude(1e-3).validate(&line).is_err());
    }

    #[test]
    fn config_roundtrip_with_units() {
        let text = r#"
            l0 = 8.333e-6
            c = "3.333 nF/m"
            length = "0.24 m"
            i_star = "6.15 mA"
            i_crit = "2.5 mA"
            n_cells = 6400
        "#;
        let line: LineSpec = toml::from_str(text).unwrap();
        assert_eq!(line.i_star, 6.15e-3);
        assert_eq!(line.model, LineModel::KineticInductance);
        let back: LineSpec = toml::from_str(&toml::to_string(&line).unwrap()).unwrap();
        assert_eq!(back, line);
    }
}
