//! Fast invariant suite: Doppler identities, down-conversion round trip and
//! stopband, exact propagation at the magic step, and agreement of the
//! composed interface ratio with the amplitude-to-shift law.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::analysis::phase_shift_from;
use crate::ddc::{DdcPlan, FilterSpec};
use crate::error::{Error, Result};
use crate::fdtd::{run, SolverConfig};
use crate::line::{
    compose_doppler, counter_front_crossing, doppler_ratio, shift_from_current, DopplerArgs,
};
use crate::signal::tone;
use crate::types::{LineSpec, WavePacketSpec};

/// Pass limits. Names match [`Tolerances::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Relative error of exact Doppler identities.
    pub doppler: f64,
    /// Relative error of tone offsets recovered by the down-converter.
    pub ddc: f64,
    /// Minimum rejection (dB) 100 MHz from the carrier.
    pub stopband_db: f64,
    /// Worst sample error of the delayed packet, relative to its peak.
    pub magic: f64,
    /// Relative difference of composed ratio and shift law for I ≤ 0.1·I*.
    pub compose: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            doppler: 1e-12,
            ddc: 1e-3,
            stopband_db: 40.0,
            magic: 1e-6,
            compose: 0.01,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 5] = ["doppler", "ddc", "stopband_db", "magic", "compose"];

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::validation(format!("tolerance {name} must be non-negative")));
        }
        let slot = match name {
            "doppler" => &mut self.doppler,
            "ddc" => &mut self.ddc,
            "stopband_db" => &mut self.stopband_db,
            "magic" => &mut self.magic,
            "compose" => &mut self.compose,
            _ => {
                return Err(Error::validation(format!(
                    "unknown tolerance '{name}' (known: {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }

    /// Applies `name=value` overrides.
    pub fn with_overrides(mut self, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            let (name, value) = o
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("tolerance override '{o}' is not name=value")))?;
            let value = value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("tolerance override '{o}' has no number")))?;
            self.set(name.trim(), value)?;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    /// `true` when `value` must exceed `limit` rather than stay below it.
    pub at_least: bool,
}

impl Check {
    pub fn passed(&self) -> bool {
        if self.at_least {
            self.value >= self.limit
        } else {
            self.value <= self.limit
        }
    }
}

pub fn run_selftest(tol: &Tolerances) -> Result<Vec<Check>> {
    let below = |name, value, limit| Check {
        name,
        value,
        limit,
        at_least: false,
    };
    Ok(vec![
        below("doppler_identities", doppler_identities()?, tol.doppler),
        below("ddc_round_trip", ddc_round_trip()?, tol.ddc),
        Check {
            name: "ddc_stopband_db",
            value: stopband_db()?,
            limit: tol.stopband_db,
            at_least: true,
        },
        below("magic_step_delay", magic_step()?, tol.magic),
        below("composed_vs_shift_law", composition()?, tol.compose),
    ])
}

pub fn format_table(checks: &[Check]) -> String {
    let mut out = format!("{:<24} {:>14} {:>16}  result\n", "check", "value", "limit");
    for c in checks {
        let _ = writeln!(
            out,
            "{:<24} {:>14.4e} {}{:>14.4e}  {}",
            c.name,
            c.value,
            if c.at_least { ">=" } else { "<=" },
            c.limit,
            if c.passed() { "pass" } else { "FAIL" }
        );
    }
    out
}

/// Stationary interface, equal media and a crossing followed by its mirror
/// all leave the frequency unchanged.
fn doppler_identities() -> Result<f64> {
    let mut worst = 0.0f64;
    let speeds = [2e6, 4.5e6, 6e6, 7.5e6];
    for &v1 in &speeds {
        for &v2 in &speeds {
            worst = worst.max((doppler_ratio(DopplerArgs::new(0.0, v1, v2))? - 1.0).abs());
            for &v in &[-3e6, -1e6, 1e6] {
                if v1 == v2 {
                    worst = worst.max((doppler_ratio(DopplerArgs::new(v, v1, v1))? - 1.0).abs());
                }
                let there = DopplerArgs::new(v, v1, v2);
                let back = DopplerArgs::new(v, v2, v1);
                let w = compose_doppler(1.0, &[there, back])?;
                worst = worst.max((w - 1.0).abs());
            }
        }
    }
    Ok(worst)
}

fn default_plan(line: &LineSpec) -> Result<DdcPlan> {
    DdcPlan::new(1.0 / line.magic_dt(), &FilterSpec::default())
}

/// Tones at known offsets from `f_d` come back as the same signed shift.
fn ddc_round_trip() -> Result<f64> {
    let line = LineSpec::default();
    let plan = default_plan(&line)?;
    let fs = 1.0 / line.magic_dt();
    let f_d = 4e9;
    let mut worst = 0.0f64;
    for delta in [-30e6, -10e6, -1e6, 1e6, 10e6, 30e6] {
        let w = tone(f_d + delta, 1e-3, 0.3, fs, 0.0, 200e-9);
        let tr = plan.down_convert(&w, f_d)?;
        let est = phase_shift_from(&tr, f_d, 0.5, 3, 0.25)?;
        let got = est.mean / (2.0 * PI);
        worst = worst.max(((got - delta) / delta).abs());
    }
    Ok(worst)
}

fn stopband_db() -> Result<f64> {
    let plan = default_plan(&LineSpec::default())?;
    Ok(-20.0 * plan.response(100e6).abs().max(1e-300).log10())
}

/// A small packet crosses an unbiased line in exactly `n_cells` steps.
fn magic_step() -> Result<f64> {
    let line = LineSpec::default().with_n_cells(800);
    let wp = WavePacketSpec::rectangular(1e9, 10e-9)
        .with_delay(1e-9)
        .with_amplitude(1e-8);
    let cfg = SolverConfig::for_line(&line, 60e-9).bare();
    let (rec, _) = run(&line, Some(&wp), None, &cfg)?;
    let z0 = line.z0();
    let lag = line.n_cells;
    let mut worst = 0.0f64;
    for n in lag..rec.right_out.len() {
        worst = worst.max((rec.right_out.samples[n] - z0 * rec.wp_in.samples[n - lag]).abs());
    }
    Ok(worst / (wp.amplitude * z0))
}

fn composition() -> Result<f64> {
    let line = LineSpec::default();
    let w = 2.0 * PI * 4e9;
    let mut worst = 0.0f64;
    for k in 1..=20 {
        let i = 0.1 * line.i_star * k as f64 / 20.0;
        let crossing = counter_front_crossing(line.v0(), 0.0, i, &line)?;
        let composed = compose_doppler(w, &[crossing])? - w;
        let law = shift_from_current(w, i, &line)?;
        worst = worst.max(((composed - law) / law).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        let checks = run_selftest(&Tolerances::default()).unwrap();
        assert!(checks.iter().all(Check::passed), "{}", format_table(&checks));
    }

    #[test]
    fn tightened_tolerance_fails_the_named_check() {
        let tol = Tolerances::default()
            .with_overrides(&["compose=1e-9".to_string()])
            .unwrap();
        let checks = run_selftest(&tol).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
        assert_eq!(failed, ["composed_vs_shift_law"]);
    }

    #[test]
    fn bad_override_is_rejected() {
        assert!(Tolerances::default().with_overrides(&["nope=1".into()]).is_err());
        assert!(Tolerances::default().with_overrides(&["ddc".into()]).is_err());
    }
}
