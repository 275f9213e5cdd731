//! Stimulus synthesis: wave packets and control pulses as sampled waveforms.
//!
//! Envelopes live on `[0, τ)` relative to the stimulus delay. A delay moves
//! `t0`; it never pads samples.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{
    ControlPulseSpec, ControlShape, EdgeShape, EnvelopeSpec, LineSpec, WavePacketSpec, Waveform,
};

fn edge_profile(s: f64, shape: EdgeShape) -> f64 {
    let s = s.clamp(0.0, 1.0);
    match shape {
        EdgeShape::Linear => s,
        EdgeShape::Smoothstep => s * s * (3.0 - 2.0 * s),
    }
}

/// Number of grid points `k/fs` that fall inside `[0, span)`.
fn samples_in(span: f64, fs: f64) -> usize {
    let x = span * fs;
    let r = x.round();
    if (x - r).abs() < 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

impl EnvelopeSpec {
    /// Envelope value at `t` relative to packet start, peak-normalised to 1.
    pub fn value_at(&self, t: f64, tau: f64) -> f64 {
        if !(0.0..tau).contains(&t) {
            return 0.0;
        }
        match self {
            EnvelopeSpec::Rectangular => 1.0,
            EnvelopeSpec::Staircase { levels } => {
                let n = levels.len();
                let j = ((t / tau) * n as f64).floor() as usize;
                let peak = levels.iter().fold(0.0f64, |m, v| m.max(*v));
                levels[j.min(n - 1)] / peak
            }
            EnvelopeSpec::Gaussian { sigma } => {
                let d = t - 0.5 * tau;
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
            EnvelopeSpec::Table { waveform } => {
                let span = (waveform.len() - 1) as f64 / waveform.sample_rate;
                waveform.value_at(waveform.t0 + t / tau * span) / waveform.peak_abs()
            }
        }
    }
}

impl WavePacketSpec {
    /// Injected current at absolute time `t`.
    pub fn current_at(&self, t: f64) -> f64 {
        self.current_rel(t - self.delay)
    }

    /// Injected current at `rel` seconds after the packet start.
    pub fn current_rel(&self, rel: f64) -> f64 {
        let env = self.envelope.value_at(rel, self.tau_wp);
        if env == 0.0 {
            return 0.0;
        }
        self.amplitude * env * self.taper_at(rel) * (self.omega_in * rel).cos()
    }

    fn taper_at(&self, rel: f64) -> f64 {
        if self.taper <= 0.0 {
            return 1.0;
        }
        let s = (rel.min(self.tau_wp - rel) / self.taper).clamp(0.0, 1.0);
        0.5 - 0.5 * (std::f64::consts::PI * s).cos()
    }
}

impl ControlPulseSpec {
    /// Injected current at absolute time `t` (A).
    pub fn current_at(&self, t: f64) -> f64 {
        let rel = t - self.delay;
        match &self.shape {
            ControlShape::Rect {
                amplitude,
                duration,
                rise,
                fall,
                edge,
            } => {
                if rel < 0.0 || rel >= *duration {
                    0.0
                } else if rel < *rise {
                    amplitude * edge_profile(rel / rise, *edge)
                } else if rel > duration - fall {
                    amplitude * edge_profile((duration - rel) / fall, *edge)
                } else {
                    *amplitude
                }
            }
            ControlShape::Arbitrary { waveform } => waveform.value_at(rel),
            ControlShape::Staircase {
                levels,
                step,
                edge_time,
                edge,
            } => {
                if rel < 0.0 {
                    return 0.0;
                }
                let j = (rel / step).floor() as usize;
                let into = rel - j as f64 * step;
                let level = |k: usize| -> f64 {
                    if k == 0 {
                        0.0
                    } else {
                        levels.get(k - 1).copied().unwrap_or(0.0)
                    }
                };
                let from = level(j);
                let to = level(j + 1);
                if *edge_time > 0.0 && into < *edge_time {
                    from + (to - from) * edge_profile(into / edge_time, *edge)
                } else {
                    to
                }
            }
        }
    }

    /// Times at which the current changes level, with the plateau values on either side.
    ///
    /// Only meaningful for `Rect` and `Staircase` shapes; each entry is
    /// `(start, end, from, to)` of one edge.
    pub fn edges(&self) -> Vec<(f64, f64, f64, f64)> {
        match &self.shape {
            ControlShape::Rect {
                amplitude,
                duration,
                rise,
                fall,
                ..
            } => vec![
                (self.delay, self.delay + rise, 0.0, *amplitude),
                (self.delay + duration - fall, self.delay + duration, *amplitude, 0.0),
            ],
            ControlShape::Staircase {
                levels,
                step,
                edge_time,
                ..
            } => {
                let mut out = Vec::with_capacity(levels.len() + 1);
                let mut prev = 0.0;
                for (k, &l) in levels.iter().chain(std::iter::once(&0.0)).enumerate() {
                    let start = self.delay + k as f64 * step;
                    if l != prev {
                        out.push((start, start + edge_time, prev, l));
                    }
                    prev = l;
                }
                out
            }
            ControlShape::Arbitrary { .. } => Vec::new(),
        }
    }
}

/// Samples a wave packet: `amplitude·env(t)·cos(ω_in·t)` on `[0, τ_wp)`, with `t0 = delay`.
pub fn synth_wave_packet(spec: &WavePacketSpec, sample_rate: f64) -> Result<Waveform> {
    if !(sample_rate >= 10.0 * spec.f_in()) {
        return Err(Error::validation(format!(
            "sample rate {sample_rate:.3e} gives fewer than 10 samples per carrier period"
        )));
    }
    spec.envelope.validate()?;
    let n = samples_in(spec.tau_wp, sample_rate).max(1);
    let samples = (0..n)
        .map(|k| spec.current_rel(k as f64 / sample_rate))
        .collect();
    Waveform::new(sample_rate, spec.delay, samples)
}

/// Samples a control pulse over its full duration, with `t0 = delay`.
pub fn synth_control_pulse(
    spec: &ControlPulseSpec,
    line: &LineSpec,
    sample_rate: f64,
) -> Result<Waveform> {
    spec.validate(line)?;
    if let ControlShape::Rect { rise, fall, .. } = &spec.shape {
        let min = 2.0 / sample_rate;
        if *rise < min || *fall < min {
            return Err(Error::validation(format!(
                "control pulse edges must span at least two samples ({min:.3e} s)"
            )));
        }
    }
    let start = match &spec.shape {
        ControlShape::Arbitrary { waveform } => spec.delay + waveform.t0.min(0.0),
        _ => spec.delay,
    };
    let end = spec.delay + spec.duration();
    let n = samples_in(end - start, sample_rate).max(1);
    let samples = (0..n)
        .map(|k| spec.current_at(start + k as f64 / sample_rate))
        .collect();
    Waveform::new(sample_rate, start, samples)
}

/// Adds seeded white Gaussian noise. Test plumbing only.
pub fn add_gaussian_noise(w: &Waveform, sigma: f64, seed: u64) -> Result<Waveform> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::validation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = w.samples.iter().map(|v| v + normal.sample(&mut rng)).collect();
    Waveform::new(w.sample_rate, w.t0, samples)
}

/// Pure tone `amplitude·cos(2π f t + phase)` sampled on `[t0, t0 + duration)`.
pub fn tone(f: f64, amplitude: f64, phase: f64, sample_rate: f64, t0: f64, duration: f64) -> Waveform {
    let n = samples_in(duration, sample_rate).max(1);
    let samples = (0..n)
        .map(|k| {
            let t = t0 + k as f64 / sample_rate;
            amplitude * (2.0 * PI * f * t + phase).cos()
        })
        .collect();
    Waveform {
        sample_rate,
        t0,
        samples,
    }
}

/// Reads a two-column `time_s,value` CSV. Lines starting with `#` are skipped,
/// as is a non-numeric header row.
pub fn read_waveform_csv(path: &Path) -> Result<Waveform> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_waveform_csv(&text)
}

pub fn parse_waveform_csv(text: &str) -> Result<Waveform> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            return Err(Error::Config(format!("line {}: expected two columns", lineno + 1)));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(t), Ok(v)) => {
                times.push(t);
                values.push(v);
            }
            _ if times.is_empty() => continue,
            _ => {
                return Err(Error::Config(format!("line {}: not numeric", lineno + 1)));
            }
        }
    }
    if times.len() < 2 {
        return Err(Error::Config("waveform CSV needs at least two rows".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Config("waveform CSV times must increase".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * dt;
        if (t - expected).abs() > 1e-3 * dt {
            return Err(Error::Config(format!(
                "waveform CSV is not uniformly sampled at row {k}"
            )));
        }
    }
    Waveform::new(1.0 / dt, times[0], values)
}

pub fn format_waveform_csv(w: &Waveform) -> String {
    let mut out = String::with_capacity(w.len() * 40);
    out.push_str("time_s,value\n");
    for (t, v) in w.times().zip(&w.samples) {
        let _ = writeln!(out, "{t:.12e},{v:.12e}");
    }
    out
}

pub fn write_waveform_csv(w: &Waveform, path: &Path) -> Result<()> {
    std::fs::write(path, format_waveform_csv(w)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::types::{LineSpec, Port};

    #[test]
    fn rectangular_packet() {
        let wp = WavePacketSpec::rectangular(4e9, 15e-9).with_taper(0.0);
        let w = synth_wave_packet(&wp, 100e9).unwrap();
        assert_eq!(w.len(), 1500);
        assert_eq!(w.samples[0], wp.amplitude);
        assert_eq!(w.t0, 0.0);
        let delayed = synth_wave_packet(&wp.clone().with_delay(3e-9), 100e9).unwrap();
        assert_eq!(delayed.t0, 3e-9);
        assert_eq!(delayed.samples, w.samples);
    }

    #[test]
    fn undersampled_carrier_rejected() {
        let wp = WavePacketSpec::rectangular(4e9, 15e-9);
        assert!(synth_wave_packet(&wp, 39e9).is_err());
    }

    #[test]
    fn staircase_plateaus() {
        let env = EnvelopeSpec::Staircase {
            levels: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
        };
        let tau = 30e-9;
        assert_relative_eq!(env.value_at(5e-9, tau), 1.0 / 3.0);
        assert_relative_eq!(env.value_at(15e-9, tau), 2.0 / 3.0);
        assert_relative_eq!(env.value_at(25e-9, tau), 1.0);
        assert_eq!(env.value_at(30e-9, tau), 0.0);
        // Plateau boundaries at τ/3 and 2τ/3.
        assert_relative_eq!(env.value_at(9.999e-9, tau), 1.0 / 3.0);
        assert_relative_eq!(env.value_at(10.001e-9, tau), 2.0 / 3.0);
    }

    #[test]
    fn gaussian_envelope() {
        let tau = 15e-9;
        let env = EnvelopeSpec::Gaussian { sigma: tau / 6.0 };
        assert_relative_eq!(env.value_at(tau / 2.0, tau), 1.0);
        assert_relative_eq!(env.value_at(0.0, tau), (-4.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn control_pulse_shapes() {
        let line = LineSpec::default();
        let cp = ControlPulseSpec::rect(1.62e-3, 30e-9);
        let w = synth_control_pulse(&cp, &line, 160e9).unwrap();
        assert_relative_eq!(w.samples[w.len() / 2], 1.62e-3);
        assert_eq!(w.samples[0], 0.0);
        assert!(w.samples.iter().all(|&v| (0.0..=1.62e-3).contains(&v)));

        let zero = synth_control_pulse(&ControlPulseSpec::rect(0.0, 30e-9), &line, 160e9).unwrap();
        assert!(zero.samples.iter().all(|&v| v == 0.0));

        let too_big = ControlPulseSpec::rect(2.6e-3, 30e-9);
        assert!(matches!(
            synth_control_pulse(&too_big, &line, 160e9),
            Err(Error::CriticalCurrentExceeded { .. })
        ));
        // 0.2 ns edges need at least 10 GS/s.
        assert!(synth_control_pulse(&cp, &line, 5e9).is_err());
    }

    #[test]
    fn smoothstep_edge_midpoint() {
        let cp = ControlPulseSpec::rect(1e-3, 30e-9).with_edges(2e-9, 2e-9, EdgeShape::Smoothstep);
        assert_relative_eq!(cp.current_at(1e-9), 0.5e-3, max_relative = 1e-12);
        assert_relative_eq!(cp.current_at(29e-9), 0.5e-3, max_relative = 1e-12);
        assert!(cp.current_at(0.2e-9) < 0.2 * 0.5e-3);
    }

    #[test]
    fn staircase_control_levels() {
        let cp = ControlPulseSpec {
            shape: ControlShape::Staircase {
                levels: vec![1e-3, 0.5e-3, 1e-3],
                step: 20e-9,
                edge_time: 0.2e-9,
                edge: EdgeShape::Linear,
            },
            port: Port::Right,
            delay: 10e-9,
        };
        assert_eq!(cp.current_at(5e-9), 0.0);
        assert_eq!(cp.current_at(20e-9), 1e-3);
        assert_eq!(cp.current_at(40e-9), 0.5e-3);
        assert_eq!(cp.current_at(60e-9), 1e-3);
        assert_eq!(cp.current_at(80e-9), 0.0);
        assert_eq!(cp.edges().len(), 4);
    }

    #[test]
    fn csv_roundtrip() {
        let w = synth_wave_packet(&WavePacketSpec::rectangular(1e9, 5e-9), 20e9).unwrap();
        let back = parse_waveform_csv(&format_waveform_csv(&w)).unwrap();
        assert_eq!(back.len(), w.len());
        assert_relative_eq!(back.sample_rate, w.sample_rate, max_relative = 1e-9);
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert_relative_eq!(a, b, max_relative = 1e-11);
        }
    }

    #[test]
    fn taper_softens_only_the_ends() {
        let wp = WavePacketSpec::rectangular(1e9, 10e-9).with_taper(1e-9);
        assert_eq!(wp.current_rel(0.0), 0.0);
        assert_relative_eq!(wp.current_rel(0.5e-9).abs(), 0.5 * wp.amplitude, max_relative = 1e-9);
        assert_relative_eq!(wp.current_rel(5e-9).abs(), wp.amplitude, max_relative = 1e-12);
        assert!(wp.clone().with_taper(6e-9).validate(&LineSpec::default()).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let w = tone(1e9, 1.0, 0.0, 10e9, 0.0, 10e-9);
        let a = add_gaussian_noise(&w, 0.1, 7).unwrap();
        let b = add_gaussian_noise(&w, 0.1, 7).unwrap();
        let c = add_gaussian_noise(&w, 0.1, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn rectangular_packet_energy(f in 1e9f64..6e9, tau in 5e-9f64..40e-9) {
            let wp = WavePacketSpec::rectangular(f, tau).with_taper(0.0);
            let w = synth_wave_packet(&wp, 100e9).unwrap();
            let nominal = wp.amplitude.powi(2) * tau / 2.0;
            let tol = 1.0 / (wp.omega_in * tau) + 2.0 / (100e9 * tau);
            prop_assert!(((w.energy() - nominal) / nominal).abs() <= tol);
        }

        #[test]
        fn synthesis_deterministic(f in 1e9f64..6e9, tau in 5e-9f64..40e-9, d in -10e-9f64..10e-9) {
            let wp = WavePacketSpec::rectangular(f, tau).with_delay(d);
            let a = synth_wave_packet(&wp, 100e9).unwrap();
            let b = synth_wave_packet(&wp, 100e9).unwrap();
            prop_assert_eq!(a.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            b.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
