use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::{RunSpec, Scenario};
use crate::error::Result;

/// SHA-256 of the scenario's canonical TOML, with the output directory
/// and thread count cleared: neither changes the results.
pub fn config_hash(s: &Scenario) -> Result<String> {
    let mut s = s.clone();
    s.output_dir = None;
    s.jobs = None;
    Ok(hex::encode(Sha256::digest(s.to_toml()?.as_bytes())))
}

/// Hash of one run: the config hash plus the run coordinates.
pub fn run_hash(config_hash: &str, run: &RunSpec) -> String {
    let mut h = Sha256::new();
    h.update(config_hash.as_bytes());
    h.update(format!(
        "|{}|{:e}|{:?}|{:?}",
        run.id, run.delay, run.amplitude, run.envelope
    ));
    hex::encode(h.finalize())
}

pub(super) fn scenario_text(s: &Scenario, hash: &str, toml: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "scenario = {}", s.name);
    let _ = writeln!(out, "config_sha256 = {hash}");
    let _ = writeln!(out, "runs = {}", s.runs().len());
    out.push_str("\n# effective configuration\n");
    out.push_str(toml);
    out
}

pub(super) fn run_text(
    s: &Scenario,
    hash: &str,
    run: &RunSpec,
    launches: (f64, Option<f64>),
    duration: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "scenario = {}", s.name);
    let _ = writeln!(out, "config_sha256 = {hash}");
    let _ = writeln!(out, "run = {}", run.id);
    let _ = writeln!(out, "run_sha256 = {}", run_hash(hash, run));
    let _ = writeln!(out, "delay_s = {:.9e}", run.delay);
    if let Some(a) = run.amplitude {
        let _ = writeln!(out, "cp_amplitude_a = {a:.9e}");
    }
    if let Some(e) = run.envelope {
        let _ = writeln!(out, "envelope_index = {e}");
    }
    let _ = writeln!(out, "wp_launch_s = {:.9e}", launches.0);
    if let Some(t) = launches.1 {
        let _ = writeln!(out, "cp_launch_s = {t:.9e}");
    }
    let _ = writeln!(out, "duration_s = {duration:.9e}");
    let _ = writeln!(out, "dt_s = {:.9e}", s.line.magic_dt());
    let _ = writeln!(out, "dx_m = {:.9e}", s.line.dx());
    let _ = writeln!(out, "shock_viscosity = {}", s.solver.shock_viscosity);
    let _ = writeln!(out, "shock_threshold_per_i_star = {}", s.solver.shock_threshold);
    let _ = writeln!(out, "coupling = {:?}", s.solver.coupling);
    out
}
