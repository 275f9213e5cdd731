//! Creation-delay sweep: every fifth delay of the `fig3` scenario, merged into a
//! delay map and a single instantaneous-shift line compared with the oracle.
//!
//!     cargo run --release --example delay_sweep -- [out_dir]

use std::path::PathBuf;

use doppler_lab::experiments::{builtin, run_scenario, RunOptions};
use doppler_lab::Result;

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/delay".into()));
    let mut s = builtin("fig3")?;
    s.delays = s.delays.iter().step_by(5).copied().collect();
    let opts = RunOptions {
        output_dir: Some(out),
        ..RunOptions::default()
    };
    let res = run_scenario(&s, &opts)?;
    for r in &res.runs {
        println!(
            "  {:>7.2} ns  {:<11} {:>9.3} MHz",
            r.spec.delay * 1e9,
            r.condition.map_or("-", |c| c.label()),
            r.shift_hz().unwrap_or(f64::NAN) / 1e6
        );
    }
    println!("\nmerged line: delay (ns), measured, oracle (MHz), packets");
    for p in res.white_line.iter().step_by(4) {
        println!("  {:7.2}  {:9.3}  {:9.3}  {}", p.delay * 1e9, p.shift_hz / 1e6, p.oracle_hz / 1e6, p.packets);
    }
    if let Some(d) = &res.dir {
        println!("map and line in {}", d.display());
    }
    Ok(())
}
