//! Shift estimates under white measurement noise on the output port.
//!
//!     cargo run --release --example noise

use doppler_lab::experiments::{builtin, run_scenario, NoiseSettings, RunOptions};
use doppler_lab::Result;

fn main() -> Result<()> {
    let mut s = builtin("fig2")?;
    s.delays = vec![-32.5e-9];
    // Packet level at the port is about 0.5 mV.
    println!(" sigma (mV)  seed   vertex (MHz)   phase (MHz)");
    for sigma in [0.0, 0.5e-3, 2e-3, 5e-3] {
        for seed in 1..=3u64 {
            s.noise = (sigma > 0.0).then_some(NoiseSettings { sigma, seed });
            let r = &run_scenario(&s, &RunOptions::default())?.runs[0];
            println!(
                " {:8.2}    {:4}   {:10.3}    {:10.3}",
                sigma * 1e3,
                seed,
                r.sweep_shift.unwrap_or(f64::NAN) / 1e6,
                r.phase_shift_hz().unwrap_or(f64::NAN) / 1e6
            );
            if sigma == 0.0 {
                break;
            }
        }
    }
    Ok(())
}
