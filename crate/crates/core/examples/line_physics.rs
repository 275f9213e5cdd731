//! Bias dependence of the line and the amplitude-to-shift law.
//!
//!     cargo run --release --example line_physics

use std::f64::consts::PI;

use doppler_lab::line::{
    characteristic_impedance, counter_front_crossing, compose_doppler, current_for_shift,
    phase_velocity, shift_from_current,
};
use doppler_lab::{LineSpec, Result};

fn main() -> Result<()> {
    let line = LineSpec::default();
    println!(
        "device: L0 {:.3e} H/m, C {:.3e} F/m, I* {:.2} mA, tau_p {:.1} ns, Z0 {:.1} ohm",
        line.l0,
        line.c,
        line.i_star * 1e3,
        line.tau_p() * 1e9,
        line.z0()
    );
    println!("\n  I (mA)   v (1e6 m/s)   Z (ohm)   shift@4GHz (MHz)   one-front (MHz)");
    let w = 2.0 * PI * 4e9;
    for k in 0..=8 {
        let i = 0.25e-3 * k as f64;
        let v = phase_velocity(i, &line)?;
        let z = characteristic_impedance(i, &line)?;
        let law = shift_from_current(w, i, &line)? / (2.0 * PI);
        // The same shift from an explicit crossing of one counter-propagating front.
        let front = if i > 0.0 {
            let c = counter_front_crossing(line.v0(), 0.0, i, &line)?;
            (compose_doppler(w, &[c])? - w) / (2.0 * PI)
        } else {
            0.0
        };
        println!(
            "  {:5.2}    {:9.4}     {:7.3}   {:12.3}       {:12.3}",
            i * 1e3,
            v / 1e6,
            z,
            law / 1e6,
            front / 1e6
        );
    }

    let target = 14e6;
    let i = current_for_shift(2.0 * PI * 500e6, 2.0 * PI * target, &line)?;
    println!("\ncurrent for a {:.0} MHz shift at 500 MHz: {:.4} mA", target / 1e6, i * 1e3);
    Ok(())
}
