//! Ray-tracing oracle: encounter conditions, predicted shifts and a spacetime
//! diagram for one packet against a rectangular control pulse.
//!
//!     cargo run --release --example oracle_diagram -- [out_dir]

use std::f64::consts::PI;
use std::path::PathBuf;

use doppler_lab::characteristics::{
    centre_shift, classify_condition, condition_boundaries, spacetime_diagram, FrontVelocity,
    OracleConfig,
};
use doppler_lab::{ControlPulseSpec, Error, LineSpec, Result, WavePacketSpec};

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/oracle".into()));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let line = LineSpec::default();
    let wp = WavePacketSpec::rectangular(4e9, 15e-9);
    let cp = ControlPulseSpec::rect(1.58e-3, 40e-9);
    let cfg = OracleConfig::default().with_front(FrontVelocity::Midpoint);

    println!("condition boundaries (packet launch minus pulse launch):");
    for (t, c) in condition_boundaries(&line, &wp, &cp)? {
        println!("  {:7.2} ns -> {}", t * 1e9, c.label());
    }

    println!("\n delay (ns)  condition     centre shift (MHz)");
    let t_cp = 60e-9;
    for k in 0..=12 {
        let delay = -60e-9 + 12e-9 * k as f64;
        let c = classify_condition(delay, &line, &wp, &cp)?;
        let w = wp.clone().with_delay(t_cp + delay);
        let p = cp.clone().with_delay(t_cp);
        let s = centre_shift(&line, &w, Some(&p), &cfg)? / (2.0 * PI);
        println!("  {:7.1}    {:<12}  {:9.3}", delay * 1e9, c.label(), s / 1e6);
    }

    let w = wp.clone().with_delay(t_cp + 7.5e-9);
    let p = cp.clone().with_delay(t_cp);
    let d = spacetime_diagram(&line, &w, Some(&p), &cfg, 200)?;
    for (name, text) in [("grid.csv", d.grid_csv()), ("rays.csv", d.rays_csv()), ("diagram.svg", d.to_svg())] {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    for r in &d.rays {
        println!("{:<8} ratio {:.6}, {} crossings", r.label, r.result.omega_ratio, r.result.crossings.len());
    }
    println!("diagram in {}", out.display());
    Ok(())
}
