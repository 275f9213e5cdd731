use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use doppler_lab::analysis::linspace;
use doppler_lab::characteristics::{spacetime_diagram, FrontVelocity, OracleConfig};
use doppler_lab::ddc::{response_table, DdcPlan};
use doppler_lab::experiments::{builtin, builtin_catalog, run_scenario, RunOptions, Scenario};
use doppler_lab::selftest::{format_table, run_selftest, Tolerances};
use doppler_lab::units::parse_quantity;
use doppler_lab::{Error, Result};

const ABOUT: &str = "Doppler frequency conversion of wave packets on a current-tunable line";

const OUTPUT_HELP: &str = "\
Output tree of `run`:
  <out>/<scenario>/config.toml         effective configuration
  <out>/<scenario>/provenance.txt      tool version, config hash, run count
  <out>/<scenario>/summary.csv         run,delay_s,amplitude_a,envelope,condition,sweep_shift_hz,
                                       phase_shift_hz,phase_f_d_hz,oracle_shift_hz,tracking_rms_rel,
                                       envelope_max_diff
  <out>/<scenario>/fits.txt            amplitude fit (key = value)
  <out>/<scenario>/map.csv             delay_s, then one column per f_d (merged delay map)
  <out>/<scenario>/white_line.csv      delay_s,shift_hz,packets,oracle_hz
  <out>/<scenario>/cross_validation.csv run,delay_s,amplitude_a,condition,vertex_hz,phase_hz,oracle_hz
  <out>/<scenario>/<run>/ports.csv     t_s,left_out_v,right_out_v,wp_in_a,cp_in_a
  <out>/<scenario>/<run>/iq_fd*.csv    t_s,i,q
  <out>/<scenario>/<run>/map.csv       t_s, then one column per f_d
  <out>/<scenario>/<run>/inst.csv      t_s,shift_hz,oracle_hz
  <out>/<scenario>/<run>/envelope.csv  t_s,reference,shifted,aligned_diff
  <out>/<scenario>/<run>/trace.csv     t_s,output_v,reference_v
  <out>/<scenario>/<run>/fits.txt      per-run estimates (key = value)

Exit status: 0 success, 1 selftest failure, 2 invalid input, 3 physics abort
(critical current, instability), 4 I/O error.";

#[derive(Parser)]
#[command(name = "doppler-lab", version, about = ABOUT, after_help = OUTPUT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Builtin scenario name (see `catalog`).
    scenario: Option<String>,
    /// Scenario config file; takes the place of a builtin name.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    output_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its results.
    Run {
        #[command(flatten)]
        source: Source,
        /// Worker threads (default: all logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed of the measurement-noise generator.
        #[arg(long)]
        seed: Option<u64>,
        /// Control-pulse amplitude, e.g. `1.2mA`; collapses an amplitude sweep.
        #[arg(long)]
        cp_amplitude: Option<String>,
    },
    /// Render spacetime diagrams (CSV and SVG) for every run of a scenario.
    Diagram {
        #[command(flatten)]
        source: Source,
        /// Grid cells per axis.
        #[arg(long, default_value_t = 200)]
        resolution: usize,
    },
    /// Run the fast invariant suite.
    Selftest {
        /// Override a limit, `name=value`; names: doppler, ddc, stopband_db, magic, compose.
        #[arg(long = "tolerance")]
        tolerance: Vec<String>,
    },
    /// List the builtin scenarios, optionally exporting them as config files.
    Catalog {
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Print the down-converter's amplitude response (offset_hz,gain,gain_db).
    Filter {
        #[command(flatten)]
        source: Source,
        /// Largest offset shown.
        #[arg(long, default_value = "150MHz")]
        span: String,
        #[arg(long, default_value_t = 31)]
        points: usize,
    },
}

fn load(source: &Source) -> Result<Scenario> {
    match (&source.scenario, &source.config) {
        (Some(_), Some(_)) => Err(Error::validation("give either a builtin name or --config, not both")),
        (Some(name), None) => builtin(name),
        (None, Some(path)) => Scenario::load(path),
        (None, None) => Err(Error::validation("no scenario: give a builtin name or --config")),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            source,
            jobs,
            seed,
            cp_amplitude,
        } => {
            let mut s = load(&source)?;
            if let Some(a) = cp_amplitude {
                s = s.with_cp_amplitude(parse_quantity(&a)?)?;
            }
            let opts = RunOptions {
                jobs,
                output_dir: Some(source.output_dir),
                seed,
                keep_records: false,
            };
            let res = run_scenario(&s, &opts)?;
            println!("{}: {} runs", res.scenario.name, res.runs.len());
            for r in &res.runs {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:+.4} MHz", v / 1e6));
                println!(
                    "  {:<5} delay {:>8.2} ns  shift {:>14}  oracle {:>14}",
                    r.spec.id,
                    r.spec.delay * 1e9,
                    f(r.shift_hz()),
                    f(r.oracle_shift)
                );
            }
            if let Some(fit) = &res.fit {
                print!("{}", fit.to_text());
            }
            if let Some(d) = &res.dir {
                println!("results in {}", d.display());
            }
            Ok(true)
        }
        Command::Diagram { source, resolution } => {
            let s = load(&source)?;
            s.validate()?;
            let dir = source.output_dir.join(&s.name);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let cfg = OracleConfig::default().with_front(FrontVelocity::Midpoint);
            for run in s.runs() {
                let wp = s.packet_for(&run);
                let cp = s.pulse_for(&run);
                let d = spacetime_diagram(&s.line, &wp, cp.as_ref(), &cfg, resolution)?;
                let stem = format!("diagram_{}", run.id);
                write(&dir.join(format!("{stem}_grid.csv")), &d.grid_csv())?;
                write(&dir.join(format!("{stem}_rays.csv")), &d.rays_csv())?;
                write(&dir.join(format!("{stem}.svg")), &d.to_svg())?;
            }
            println!("diagrams in {}", dir.display());
            Ok(true)
        }
        Command::Selftest { tolerance } => {
            let tol = Tolerances::default().with_overrides(&tolerance)?;
            let checks = run_selftest(&tol)?;
            print!("{}", format_table(&checks));
            let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
            if !failed.is_empty() {
                eprintln!("selftest failed: {}", failed.join(", "));
            }
            Ok(failed.is_empty())
        }
        Command::Catalog { export } => {
            if let Some(dir) = &export {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            for s in builtin_catalog() {
                let first = s.description.lines().next().unwrap_or("");
                println!("{:<6} {:>4} runs  {first}", s.name, s.runs().len());
                if let Some(dir) = &export {
                    s.save(&dir.join(format!("{}.toml", s.name)))?;
                }
            }
            Ok(true)
        }
        Command::Filter { source, span, points } => {
            let (line, filter) = match (&source.scenario, &source.config) {
                (None, None) => (doppler_lab::LineSpec::default(), doppler_lab::ddc::FilterSpec::default()),
                _ => {
                    let s = load(&source)?;
                    (s.line, s.filter)
                }
            };
            let plan = DdcPlan::new(1.0 / line.magic_dt(), &filter)?;
            println!("# {}", plan.describe());
            println!("# settling time {:.3} ns", plan.settling_time() * 1e9);
            print!("{}", response_table(&plan, &linspace(0.0, parse_quantity(&span)?, points.max(2))));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
