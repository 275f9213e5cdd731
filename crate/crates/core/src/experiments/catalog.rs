use std::f64::consts::PI;

use super::{AnalysisTag, CpPlan, DdcMode, FreqAxis, Scenario, SolverSettings};
use crate::analysis::linspace;
use crate::ddc::FilterSpec;
use crate::error::{Error, Result};
use crate::line::current_for_shift;
use crate::types::{
    ControlPulseSpec, ControlShape, EdgeShape, EnvelopeSpec, LineSpec, WavePacketSpec, Waveform,
};

pub const BUILTIN_NAMES: [&str; 8] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "edf2", "edf3"];

/// All builtin scenarios, in [`BUILTIN_NAMES`] order.
pub fn builtin_catalog() -> Vec<Scenario> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("builtin scenarios are valid"))
        .collect()
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let s = match name {
        "fig1" => fig1()?,
        "fig2" => fig2(),
        "fig3" => fig3(),
        "fig4" => fig4()?,
        "fig5" => fig5(),
        "fig6" => fig6(),
        "edf2" => edf2(),
        "edf3" => edf3(),
        _ => {
            return Err(Error::validation(format!(
                "unknown builtin scenario '{name}' (known: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    s.validate()?;
    Ok(s)
}

fn base(name: &str, description: &str, wp: WavePacketSpec) -> Scenario {
    Scenario {
        name: name.into(),
        description: description.into(),
        line: LineSpec::default(),
        wp,
        cp: CpPlan::None,
        delays: vec![0.0],
        envelopes: Vec::new(),
        ddc_plan: Vec::new(),
        filter: FilterSpec::default(),
        analysis: vec![AnalysisTag::GlobalShift],
        solver: SolverSettings::default(),
        noise: None,
        output: Default::default(),
        output_dir: None,
        jobs: None,
    }
}

fn tracked(f_d: f64) -> DdcMode {
    DdcMode::FixedFd { f_d, track: true }
}

fn sweep(centre: f64, half_span: f64, points: usize) -> DdcMode {
    DdcMode::FreqSweep {
        axis: FreqAxis::centred(centre, half_span, points),
    }
}

fn fig1() -> Result<Scenario> {
    let f_in = 500e6;
    let line = LineSpec::default();
    let amp = current_for_shift(2.0 * PI * f_in, 2.0 * PI * 14e6, &line)?;
    let wp = WavePacketSpec::rectangular(f_in, 40e-9).with_envelope(EnvelopeSpec::Staircase {
        levels: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
    });
    let mut s = base(
        "fig1",
        &format!(
            "Stepped-envelope 500 MHz packet launched into a 100 ns control pulse so that it\n\
             crosses only the falling front: a single upward shift of about 14 MHz.\n\
             The control amplitude is not given with the measurement; it is the current that\n\
             produces a 14 MHz shift at 500 MHz on this device, {:.4} mA.",
            amp * 1e3
        ),
        wp,
    );
    s.cp = CpPlan::Single {
        pulse: ControlPulseSpec::rect(amp, 100e-9),
    };
    s.delays = vec![75e-9];
    s.ddc_plan = vec![sweep(f_in, 50e6, 101), tracked(f_in)];
    s.analysis = vec![AnalysisTag::GlobalShift, AnalysisTag::FullTrace];
    Ok(s)
}

fn fig2() -> Scenario {
    let mut s = base(
        "fig2",
        "15 ns, 4 GHz packet and a 1.62 mA, 30 ns control pulse at four creation delays:\n\
         (a) no meeting, (b) rising front only, (c) both fronts, (d) falling front only.",
        WavePacketSpec::rectangular(4e9, 15e-9),
    );
    s.cp = CpPlan::Single {
        pulse: ControlPulseSpec::rect(1.62e-3, 30e-9),
    };
    s.delays = vec![-70e-9, -32.5e-9, 7.5e-9, 47.5e-9];
    s.ddc_plan = vec![sweep(4e9, 200e6, 201), tracked(4e9)];
    s.analysis = vec![AnalysisTag::GlobalShift, AnalysisTag::Instantaneous];
    s
}

fn fig3() -> Scenario {
    let mut s = base(
        "fig3",
        "Creation-delay sweep: 70 short packets across a 1.58 mA, 40 ns control pulse.\n\
         Fixed-time cuts are stacked into a delay map and the interior instantaneous shifts\n\
         of overlapping packets are averaged into a single trace.",
        WavePacketSpec::rectangular(4e9, 15e-9),
    );
    s.cp = CpPlan::Single {
        pulse: ControlPulseSpec::rect(1.58e-3, 40e-9),
    };
    s.delays = linspace(-56e-9, 72e-9, 70);
    s.ddc_plan = vec![sweep(4e9, 95e6, 191), tracked(4e9)];
    s.analysis = vec![
        AnalysisTag::GlobalShift,
        AnalysisTag::Instantaneous,
        AnalysisTag::DelayMerge,
    ];
    s.output.write_ports = false;
    s.output.write_iq = false;
    s
}

/// Two Gaussian humps of unequal height on a 64-point table.
fn two_hump() -> Result<Waveform> {
    let n = 64;
    let g = |x: f64, c: f64, w: f64| (-0.5 * ((x - c) / w).powi(2)).exp();
    let samples = (0..n)
        .map(|k| {
            let x = k as f64 / (n - 1) as f64;
            g(x, 0.3, 0.1) + 0.6 * g(x, 0.72, 0.09)
        })
        .collect();
    Waveform::new(n as f64, 0.0, samples)
}

fn fig4() -> Result<Scenario> {
    let mut s = base(
        "fig4",
        "Three 30 ns envelopes through the rising front of a 0.52 mA control pulse: the\n\
         frequency shifts while the envelope shape is preserved.",
        WavePacketSpec::rectangular(4e9, 30e-9),
    );
    s.cp = CpPlan::Single {
        pulse: ControlPulseSpec::rect(0.52e-3, 100e-9),
    };
    s.envelopes = vec![
        EnvelopeSpec::Staircase {
            levels: vec![0.4, 1.0, 0.7],
        },
        EnvelopeSpec::Gaussian { sigma: 6e-9 },
        EnvelopeSpec::Table { waveform: two_hump()? },
    ];
    s.ddc_plan = vec![sweep(4e9, 50e6, 101), tracked(4e9)];
    s.analysis = vec![AnalysisTag::GlobalShift, AnalysisTag::EnvelopeCompare];
    Ok(s)
}

fn fig5() -> Scenario {
    let mut s = base(
        "fig5",
        "Control-amplitude sweep, 0.1 to 2.0 mA, each at 24 creation delays on the rising\n\
         front. The averaged shifts are fitted with a quadratic-plus-quartic law.",
        WavePacketSpec::rectangular(4e9, 15e-9),
    );
    s.cp = CpPlan::AmplitudeSweep {
        pulse: ControlPulseSpec::rect(1e-3, 100e-9),
        amplitudes: [0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.62, 1.75, 1.9, 2.0]
            .iter()
            .map(|a| a * 1e-3)
            .collect(),
    };
    s.delays = linspace(-20e-9, 21.8e-9, 24);
    s.ddc_plan = vec![tracked(4e9)];
    s.analysis = vec![AnalysisTag::GlobalShift, AnalysisTag::AmplitudeFit];
    s.output.write_ports = false;
    s
}

fn fig6() -> Scenario {
    let levels: Vec<f64> = [0.6, 1.4, 1.0, 1.7, 0.8].iter().map(|a| a * 1e-3).collect();
    let step = 30e-9;
    let tau = levels.len() as f64 * step + 20e-9;
    let mut s = base(
        "fig6",
        "Long packet against a multi-level staircase control pulse: the instantaneous\n\
         output frequency follows the control current. The level table is illustrative.\n\
         A fixed down-conversion frequency in the middle of the expected shifts and a\n\
         wider low-pass filter keep every level in band with a short settling time.",
        WavePacketSpec::rectangular(4e9, tau),
    );
    s.cp = CpPlan::Single {
        pulse: ControlPulseSpec {
            shape: ControlShape::Staircase {
                levels,
                step,
                edge_time: 1e-9,
                edge: EdgeShape::Smoothstep,
            },
            port: crate::types::Port::Right,
            delay: 0.0,
        },
    };
    s.delays = vec![-50e-9];
    s.ddc_plan = vec![DdcMode::FixedFd {
        f_d: 3.957e9,
        track: false,
    }];
    s.filter = FilterSpec {
        cutoff: 80e6,
        taps: 127,
        ..FilterSpec::default()
    };
    s.analysis = vec![AnalysisTag::Instantaneous];
    s
}

fn edf2() -> Scenario {
    let mut s = base(
        "edf2",
        "Control pulse with a slow 40 ns linear rise to 1.5 mA: the instantaneous shift of\n\
         a 60 ns packet ramps with the control current instead of jumping.",
        WavePacketSpec::rectangular(4e9, 60e-9),
    );
    s.cp = CpPlan::Single {
        pulse: ControlPulseSpec::rect(1.5e-3, 150e-9).with_edges(40e-9, 0.2e-9, EdgeShape::Linear),
    };
    s.delays = vec![-50e-9];
    s.ddc_plan = vec![DdcMode::FixedFd {
        f_d: 3.97e9,
        track: false,
    }];
    s.filter = FilterSpec {
        cutoff: 80e6,
        taps: 127,
        ..FilterSpec::default()
    };
    s.analysis = vec![AnalysisTag::Instantaneous];
    s
}

fn edf3() -> Scenario {
    let mut s = base(
        "edf3",
        "500 MHz, 40 ns packets crossing only the falling front, for eight control\n\
         amplitudes between 0.25 and 2.0 mA. The upward shifts are mirrored before the\n\
         quadratic-plus-quartic fit.",
        WavePacketSpec::rectangular(500e6, 40e-9),
    );
    s.cp = CpPlan::AmplitudeSweep {
        pulse: ControlPulseSpec::rect(1e-3, 100e-9),
        amplitudes: linspace(0.25e-3, 2.0e-3, 8),
    };
    s.delays = vec![75e-9];
    s.ddc_plan = vec![tracked(500e6)];
    s.analysis = vec![AnalysisTag::GlobalShift, AnalysisTag::AmplitudeFit];
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_round_trips_through_toml() {
        for s in builtin_catalog() {
            let text = s.to_toml().unwrap();
            let back = Scenario::from_toml(&text).unwrap();
            assert_eq!(back, s, "{}", s.name);
        }
    }

    #[test]
    fn fig1_amplitude_is_the_inverted_current() {
        let s = builtin("fig1").unwrap();
        let a = s.pulse().unwrap().peak_current();
        assert!((a - 2.058184e-3).abs() < 1e-8, "{a}");
    }

    #[test]
    fn fig3_has_seventy_delays_and_191_frequencies() {
        let s = builtin("fig3").unwrap();
        assert_eq!(s.runs().len(), 70);
        assert_eq!(s.sweep_axis().unwrap().points, 191);
    }

    #[test]
    fn unknown_builtin_is_a_validation_error() {
        assert!(builtin("fig9").is_err());
    }
}
