//! Three packet envelopes pass the rising front of a weak control pulse: the
//! carrier shifts, the envelope shape does not.
//!
//!     cargo run --release --example envelope_shape

use doppler_lab::experiments::{builtin, run_scenario, RunOptions};
use doppler_lab::Result;

fn main() -> Result<()> {
    let s = builtin("fig4")?;
    let res = run_scenario(&s, &RunOptions::default())?;
    println!(" envelope              shift (MHz)   oracle (MHz)   max shape difference");
    for (r, env) in res.runs.iter().zip(&s.envelopes) {
        let name = format!("{env:?}");
        let name: String = name.split([' ', '{', '(']).next().unwrap_or("").into();
        println!(
            " {:<20} {:10.3}    {:10.3}      {:.2} %",
            name,
            r.shift_hz().unwrap_or(f64::NAN) / 1e6,
            r.oracle_shift.unwrap_or(f64::NAN) / 1e6,
            100.0 * r.envelope_error.unwrap_or(f64::NAN)
        );
        for n in &r.notes {
            println!("   note: {n}");
        }
    }
    Ok(())
}
