//! Solver sanity on an unbiased line: a packet crosses in exactly one transit
//! time at the magic step, and a control pulse alone runs without packets.
//!
//!     cargo run --release --example fdtd_baseline

use doppler_lab::fdtd::{run, SolverConfig};
use doppler_lab::{ControlPulseSpec, LineSpec, Result, WavePacketSpec};

fn main() -> Result<()> {
    let line = LineSpec::default();
    let wp = WavePacketSpec::rectangular(4e9, 15e-9).with_delay(1e-9);
    // Bare leapfrog: no shock viscosity or grid filter, so the magic step is exact.
    let cfg = SolverConfig::for_line(&line, 60e-9).bare();
    let t = std::time::Instant::now();
    let (rec, _) = run(&line, Some(&wp), None, &cfg)?;
    println!("{} cells, {} steps of {:.3} ps in {:?}", line.n_cells, cfg.n_steps(), cfg.dt * 1e12, t.elapsed());

    let z0 = line.z0();
    let lag = line.n_cells;
    let worst = (lag..rec.right_out.len())
        .map(|n| (rec.right_out.samples[n] - z0 * rec.wp_in.samples[n - lag]).abs())
        .fold(0.0, f64::max);
    println!("transit {:.2} ns; worst sample error {:.2e} of peak", lag as f64 * cfg.dt * 1e9, worst / (z0 * wp.amplitude));
    println!("reflection at the far port: {:.2e} V", rec.left_out.peak_abs());

    // Control pulse alone: the front steepens on the way (falling edge shock).
    let cp = ControlPulseSpec::rect(1.62e-3, 30e-9).with_delay(2e-9);
    let cfg = SolverConfig::for_line(&line, 90e-9);
    let (rec, _) = run(&line, None, Some(&cp), &cfg)?;
    println!(
        "control pulse {:.2} mA: left-port output peak {:.3} V (Z0*I = {:.3} V)",
        cp.peak_current() * 1e3,
        rec.left_out.peak_abs(),
        z0 * cp.peak_current()
    );
    Ok(())
}
