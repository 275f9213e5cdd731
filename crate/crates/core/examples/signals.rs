//! Wave-packet envelopes and control-pulse shapes, sampled and written as CSV.
//!
//!     cargo run --release --example signals -- [out_dir]

use std::path::PathBuf;

use doppler_lab::signal::{synth_control_pulse, synth_wave_packet, write_waveform_csv};
use doppler_lab::{
    ControlPulseSpec, ControlShape, EdgeShape, EnvelopeSpec, LineSpec, Port, Result, WavePacketSpec,
};

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/signals".into()));
    std::fs::create_dir_all(&out).map_err(|e| doppler_lab::Error::io(&out, e))?;
    let line = LineSpec::default();
    let fs = 1.0 / line.magic_dt();

    let envelopes = [
        ("rect", EnvelopeSpec::Rectangular),
        ("gauss", EnvelopeSpec::Gaussian { sigma: 5e-9 }),
        ("stairs", EnvelopeSpec::Staircase { levels: vec![0.3, 1.0, 0.6] }),
    ];
    for (name, env) in envelopes {
        let wp = WavePacketSpec::rectangular(4e9, 30e-9).with_envelope(env);
        let w = synth_wave_packet(&wp, fs)?;
        let path = out.join(format!("wp_{name}.csv"));
        write_waveform_csv(&w, &path)?;
        println!("{name:<7} {} samples, peak {:.2e} A, energy {:.3e} -> {}", w.len(), w.peak_abs(), w.energy(), path.display());
    }

    let pulses = [
        ("rect", ControlPulseSpec::rect(1.5e-3, 40e-9)),
        ("slow_rise", ControlPulseSpec::rect(1.5e-3, 80e-9).with_edges(20e-9, 0.2e-9, EdgeShape::Linear)),
        (
            "staircase",
            ControlPulseSpec {
                shape: ControlShape::Staircase {
                    levels: vec![0.5e-3, 1.5e-3, 1.0e-3],
                    step: 20e-9,
                    edge_time: 1e-9,
                    edge: EdgeShape::Smoothstep,
                },
                port: Port::Right,
                delay: 0.0,
            },
        ),
    ];
    for (name, cp) in pulses {
        let w = synth_control_pulse(&cp, &line, fs)?;
        let path = out.join(format!("cp_{name}.csv"));
        write_waveform_csv(&w, &path)?;
        println!("{name:<10} duration {:.1} ns, peak {:.2} mA -> {}", cp.duration() * 1e9, cp.peak_current() * 1e3, path.display());
    }
    Ok(())
}
