//! One solver run through the rising front of a control pulse, measured three
//! ways: the frequency-sweep vertex, the tracked phase slope, and the oracle.
//!
//!     cargo run --release --example phase_method

use std::f64::consts::PI;

use doppler_lab::analysis::{linspace, sweep_shift, tracked_phase_shift};
use doppler_lab::characteristics::{centre_shift, FrontVelocity, OracleConfig};
use doppler_lab::ddc::{DdcPlan, FilterSpec};
use doppler_lab::fdtd::{run, SolverConfig};
use doppler_lab::{ControlPulseSpec, LineSpec, Port, Result, WavePacketSpec};

fn main() -> Result<()> {
    let line = LineSpec::default();
    let f_in = 4e9;
    // Packet launched 32.5 ns before the pulse, from the opposite port.
    let wp = WavePacketSpec::rectangular(f_in, 15e-9).with_delay(2e-9);
    let cp = ControlPulseSpec::rect(1.62e-3, 30e-9).with_port(Port::Right).with_delay(34.5e-9);
    let cfg = SolverConfig::for_line(&line, 120e-9);
    let t = std::time::Instant::now();
    let (rec, _) = run(&line, Some(&wp), Some(&cp), &cfg)?;
    println!("solver {:?}", t.elapsed());

    let out = &rec.right_out;
    let plan = DdcPlan::new(out.sample_rate, &FilterSpec::default())?;
    let (vertex, map) = sweep_shift(&plan, out, f_in, &linspace(f_in - 200e6, f_in + 200e6, 201))?;
    let phase = tracked_phase_shift(&plan, out, f_in, f_in - 40e6, 0.5, 1e3)?;
    let oracle = centre_shift(&line, &wp, Some(&cp), &OracleConfig::default().with_front(FrontVelocity::Midpoint))?;
    println!("sweep vertex  {:9.3} MHz (cut at {:.1} ns)", vertex / 1e6, map.peak_time() * 1e9);
    println!("phase slope   {:9.3} MHz (f_d {:.4} GHz)", phase.mean / (2.0 * PI) / 1e6, phase.f_d / 1e9);
    println!("oracle        {:9.3} MHz", oracle / (2.0 * PI) / 1e6);

    println!("\ninstantaneous shift:");
    let tr = &phase.trace;
    for k in 0..tr.len() {
        println!("  {:7.2} ns  {:9.3} MHz", tr.time_at(k) * 1e9, tr.samples[k] / (2.0 * PI) / 1e6);
    }
    Ok(())
}
