//! Down-converter characterisation: amplitude response, settling time and
//! recovery of known tone offsets.
//!
//!     cargo run --release --example ddc_metrology

use std::f64::consts::PI;

use doppler_lab::analysis::{linspace, phase_shift_from};
use doppler_lab::ddc::{response_table, DdcPlan, FilterSpec};
use doppler_lab::signal::tone;
use doppler_lab::{LineSpec, Result};

fn main() -> Result<()> {
    let fs = 1.0 / LineSpec::default().magic_dt();
    for spec in [FilterSpec::default(), FilterSpec { cutoff: 80e6, taps: 127, ..FilterSpec::default() }] {
        let plan = DdcPlan::new(fs, &spec)?;
        println!("# {}", plan.describe());
        println!("# settling time {:.2} ns", plan.settling_time() * 1e9);
        print!("{}", response_table(&plan, &linspace(0.0, 150e6, 7)));

        let f_d = 4e9;
        println!("  offset (MHz)  recovered (MHz)  rel. error");
        for delta in [-40e6, -10e6, 1e6, 25e6] {
            let w = tone(f_d + delta, 1e-3, 0.7, fs, 0.0, 200e-9);
            let tr = plan.down_convert(&w, f_d)?;
            let got = phase_shift_from(&tr, f_d, 0.5, 3, 0.25)?.mean / (2.0 * PI);
            println!("  {:10.3}    {:12.6}    {:.2e}", delta / 1e6, got / 1e6, ((got - delta) / delta).abs());
        }
        println!();
    }
    Ok(())
}
