//! Runs a builtin scenario or a TOML config and writes the full result tree.
//!
//!     cargo run --release --example scenario_runner -- fig2 [out_dir]
//!     cargo run --release --example scenario_runner -- configs/fig1.toml

use std::path::{Path, PathBuf};

use doppler_lab::experiments::{builtin, run_scenario, RunOptions, Scenario};
use doppler_lab::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let which = args.next().unwrap_or_else(|| "fig2".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/example-out/runs".into()));
    let s = if which.ends_with(".toml") {
        Scenario::load(Path::new(&which))?
    } else {
        builtin(&which)?
    };
    println!("{}: {}", s.name, s.description.lines().next().unwrap_or(""));
    let t = std::time::Instant::now();
    let opts = RunOptions {
        output_dir: Some(out),
        ..RunOptions::default()
    };
    let res = run_scenario(&s, &opts)?;
    println!("{} runs in {:?}, config sha256 {}", res.runs.len(), t.elapsed(), &res.config_hash[..16]);
    for r in &res.runs {
        println!(
            "  {:<5} {:>8.2} ns  {:<10}  shift {:>9.3} MHz  oracle {:>9.3} MHz",
            r.spec.id,
            r.spec.delay * 1e9,
            r.condition.map_or("-", |c| c.label()),
            r.shift_hz().unwrap_or(f64::NAN) / 1e6,
            r.oracle_shift.unwrap_or(f64::NAN) / 1e6
        );
    }
    if let Some(fit) = &res.fit {
        print!("{}", fit.to_text());
    }
    if let Some(d) = &res.dir {
        println!("results in {}", d.display());
    }
    Ok(())
}
