//! End-to-end acceptance checks, one line per criterion.
//!
//! The sorted summary is always written to stderr; run with `-- --nocapture`
//! to also see progress as each criterion finishes. Criteria listed in `KNOWN_DEVIATIONS` are evaluated and reported
//! like the others; the test asserts that they still fail, so the list cannot
//! go stale silently.

use std::f64::consts::PI;
use std::io::Write as _;
use std::time::Instant;

use doppler_lab::analysis::{fit_parabola_peak, magnitude_map_with, PARABOLA_FRACTION};
use doppler_lab::characteristics::{condition_boundaries, Condition};
use doppler_lab::ddc::{DdcPlan, FilterSpec};
use doppler_lab::experiments::{builtin, run_scenario, RunOptions, ScenarioResult};
use doppler_lab::fdtd::{run, SolverConfig};
use doppler_lab::selftest::{run_selftest, Tolerances};
use doppler_lab::{LineSpec, WavePacketSpec};

/// Criteria that the model cannot meet as stated; see the README.
const KNOWN_DEVIATIONS: [u32; 3] = [3, 4, 9];

struct Report {
    lines: Vec<(u32, bool, String)>,
}

impl Report {
    fn add(&mut self, n: u32, pass: bool, text: String) {
        let line = format!("criterion {n:>2}: {} {text}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((n, pass, line));
    }
}

fn opts() -> RunOptions {
    RunOptions::default()
}

fn mhz(hz: f64) -> f64 {
    hz / 1e6
}

fn c1_baseline(rep: &mut Report) {
    let start = Instant::now();
    let line = LineSpec::default();
    let wp = WavePacketSpec::rectangular(4e9, 15e-9).with_delay(2e-9);
    let cfg = SolverConfig::for_line(&line, 70e-9);
    let (rec, _) = run(&line, Some(&wp), None, &cfg).unwrap();
    let out = &rec.right_out;
    let z0 = line.z0();
    let input: Vec<f64> = rec.wp_in.samples.iter().map(|i| z0 * i).collect();

    // Lag of the cross-correlation peak, searched around the transit time.
    let n0 = line.n_cells as isize;
    let xcorr = |lag: isize| -> f64 {
        (0..input.len())
            .filter_map(|k| {
                let j = k as isize + lag;
                (j >= 0 && (j as usize) < out.len()).then(|| input[k] * out.samples[j as usize])
            })
            .sum()
    };
    let lag = (n0 - 20..=n0 + 20).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
    let lag_err = (lag - n0).abs();

    let (mut diff, mut norm) = (0.0, 0.0);
    for (k, &x) in input.iter().enumerate() {
        let j = k + n0 as usize;
        if j < out.len() {
            diff += (out.samples[j] - x).powi(2);
            norm += x * x;
        }
    }
    let l2 = (diff / norm).sqrt();

    let plan = DdcPlan::new(1.0 / line.magic_dt(), &FilterSpec::default()).unwrap();
    let axis = doppler_lab::analysis::linspace(3.95e9, 4.05e9, 101);
    let map = magnitude_map_with(&plan, out, &axis).unwrap();
    let f_out = fit_parabola_peak(&map, map.peak_time(), PARABOLA_FRACTION).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = lag_err <= 1 && l2 < 0.01 && (f_out - 4e9).abs() < 1e6 && secs < 10.0;
    rep.add(
        1,
        pass,
        format!(
            "baseline: delay {} steps (expected {n0}, |err| {lag_err} dt), envelope L2 diff {:.2e}, \
             f_out {:.4} MHz, {secs:.1} s",
            lag,
            l2,
            mhz(f_out)
        ),
    );
}

fn fig2_checks(rep: &mut Report) {
    let res = run_scenario(&builtin("fig2").unwrap(), &opts()).unwrap();
    let by_cond = |c: Condition| res.runs.iter().find(|r| r.condition == Some(c)).unwrap();
    let cancel = by_cond(Condition::Cancel);
    let c = cancel.shift_hz().unwrap();
    rep.add(
        2,
        c.abs() < 0.5e6,
        format!(
            "cancellation: phase {:+.3} MHz, vertex {:+.3} MHz (limit 0.5 MHz)",
            mhz(c),
            mhz(cancel.sweep_shift.unwrap())
        ),
    );
    let red = by_cond(Condition::RedOnly);
    let blue = by_cond(Condition::BlueOnly);
    let asym = |r: f64, b: f64| (r + b).abs() / r.abs();
    let (rp, bp) = (red.shift_hz().unwrap(), blue.shift_hz().unwrap());
    let (rv, bv) = (red.sweep_shift.unwrap(), blue.sweep_shift.unwrap());
    rep.add(
        3,
        asym(rp, bp) < 0.02,
        format!(
            "red/blue symmetry: phase {:+.3}/{:+.3} MHz -> {:.2} %, vertex {:+.3}/{:+.3} MHz -> {:.2} % (limit 2 %)",
            mhz(rp),
            mhz(bp),
            100.0 * asym(rp, bp),
            mhz(rv),
            mhz(bv),
            100.0 * asym(rv, bv)
        ),
    );
}

/// fig5 on three of its 24 delays (first, middle, last); see the README.
fn fig5_subset() -> (ScenarioResult, f64, usize) {
    let mut s = builtin("fig5").unwrap();
    let n = s.delays.len();
    s.delays = vec![s.delays[0], s.delays[n / 2 - 1], s.delays[n - 1]];
    let start = Instant::now();
    let res = run_scenario(&s, &opts()).unwrap();
    (res, start.elapsed().as_secs_f64(), n)
}

fn c4_c5(rep: &mut Report) -> doppler_lab::analysis::ShiftFit {
    let (res, secs, n_full) = fig5_subset();
    let line = LineSpec::default();
    let fit = res.fit.clone().unwrap();
    let i_err = (fit.i_star_hat - line.i_star).abs() / line.i_star;
    let w_in = res.scenario.wp.omega_in;
    let mut worst = (0.0f64, 0.0);
    for &(a, dw) in &res.fit_points {
        if a <= 0.5 * line.i_star {
            let law = -(w_in / 4.0) * (a / line.i_star).powi(2);
            let dev = ((dw - law) / law).abs();
            if dev > worst.0 {
                worst = (dev, a);
            }
        }
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let full = secs * n_full as f64 / res.scenario.delays.len() as f64;
    let pass = i_err < 0.02 && worst.0 < 0.03 && secs < 180.0;
    rep.add(
        4,
        pass,
        format!(
            "amplitude law: I*_hat {:.4} mA ({:.2} %), c4_hat {:.3}, worst pointwise deviation {:.2} % at {:.2} mA \
             (limit 3 %); {} runs in {secs:.0} s on {cores} core(s), full {}-delay sweep est. {:.0} s",
            fit.i_star_hat * 1e3,
            100.0 * i_err,
            fit.c4_hat,
            100.0 * worst.0,
            worst.1 * 1e3,
            res.runs.len(),
            n_full,
            full
        ),
    );

    let mut worst5 = (0.0f64, 0.0);
    for r in &res.runs {
        let (Some(m), Some(o)) = (r.shift_hz(), r.oracle_shift) else { continue };
        if (m - o).abs() > worst5.0 {
            worst5 = ((m - o).abs(), r.spec.amplitude.unwrap());
        }
    }
    rep.add(
        5,
        worst5.0 < 1e6,
        format!(
            "oracle equivalence: max |measured - traced| {:.3} MHz at {:.2} mA over {} runs (limit 1 MHz)",
            mhz(worst5.0),
            worst5.1 * 1e3,
            res.runs.len()
        ),
    );
    fit
}

fn c6_c10(rep: &mut Report) {
    let start = Instant::now();
    let checks = run_selftest(&Tolerances::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let get = |name: &str| checks.iter().find(|c| c.name == name).unwrap();
    let comp = get("composed_vs_shift_law");
    rep.add(
        6,
        comp.passed() && secs < 1.0,
        format!(
            "composition vs shift law: worst {:.3} % for I <= 0.1 I* (limit 1 %), suite {secs:.2} s",
            100.0 * comp.value
        ),
    );
    let rt = get("ddc_round_trip");
    let sb = get("ddc_stopband_db");
    rep.add(
        10,
        rt.value < 1e-3 && sb.value > 40.0,
        format!(
            "DDC metrology: worst offset error {:.2e} for |offset| <= 30 MHz (limit 1e-3), rejection at 100 MHz {:.1} dB",
            rt.value, sb.value
        ),
    );
}

fn c7(rep: &mut Report) {
    let res = run_scenario(&builtin("fig6").unwrap(), &opts()).unwrap();
    let e = res.runs[0].tracking_error.unwrap();
    rep.add(
        7,
        e < 0.05,
        format!("staircase tracking: RMS {:.2} % of peak shift (limit 5 %)", 100.0 * e),
    );
}

fn c8(rep: &mut Report) {
    let res = run_scenario(&builtin("fig4").unwrap(), &opts()).unwrap();
    let errs: Vec<f64> = res.runs.iter().map(|r| r.envelope_error.unwrap()).collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let each: Vec<String> = errs.iter().map(|e| format!("{:.2} %", 100.0 * e)).collect();
    rep.add(
        8,
        worst < 0.05,
        format!("shape preservation: max envelope difference per envelope [{}] (limit 5 %)", each.join(", ")),
    );
}

fn c9_c11(rep: &mut Report, fit: &doppler_lab::analysis::ShiftFit) {
    let s = builtin("fig3").unwrap();
    let start = Instant::now();
    let res = run_scenario(&s, &opts()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    rep.add(
        11,
        secs < 600.0 && res.runs.len() == 70 && s.sweep_axis().unwrap().points == 191,
        format!("fig3: 70 delays x 191 frequencies in {secs:.0} s on {cores} core(s) (limit 600 s on 8)"),
    );

    let b = condition_boundaries(&s.line, &s.wp, s.pulse().unwrap()).unwrap();
    let cuts: Vec<f64> = b.iter().map(|c| c.0).collect();
    let widths: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    let expected = [40e-9, 22e-9, 40e-9];
    let geometry_ok = widths.len() == 3 && widths.iter().zip(expected).all(|(w, e)| (w - e).abs() < 1e-12);

    // Bands: runs whose packet centre is at least 10 ns from every boundary.
    let amp = s.pulse().unwrap().peak_current();
    let law = fit.eval(amp) / (2.0 * PI);
    let (mut red, mut zero, mut blue) = (Vec::new(), Vec::new(), Vec::new());
    for r in &res.runs {
        if cuts.iter().any(|c| (r.spec.delay - c).abs() < 10e-9) {
            continue;
        }
        let v = r.shift_hz().unwrap();
        match r.condition {
            Some(Condition::RedOnly) => red.push(v),
            Some(Condition::BlueOnly) => blue.push(v),
            Some(Condition::Cancel) | Some(Condition::NoMeeting) => zero.push(v),
            None => {}
        }
    }
    let rel = |v: &[f64], target: f64| v.iter().map(|x| ((x - target) / target).abs()).fold(0.0, f64::max);
    let zmax = zero.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let bands_ok = !red.is_empty()
        && !blue.is_empty()
        && rel(&red, law) < 0.03
        && rel(&blue, -law) < 0.03
        && zmax < 0.5e6;
    rep.add(
        9,
        geometry_ok && bands_ok,
        format!(
            "delay sweep: boundaries {:?} ns, band widths {:?} ns (expected 40/22/40); \
             red band {} runs within {:.2} % of fitted law {:+.2} MHz, blue {} runs within {:.2} %, \
             zero band max |shift| {:.3} MHz",
            cuts.iter().map(|c| (c * 1e10).round() / 10.0).collect::<Vec<_>>(),
            widths.iter().map(|w| (w * 1e10).round() / 10.0).collect::<Vec<_>>(),
            red.len(),
            100.0 * rel(&red, law),
            mhz(law),
            blue.len(),
            100.0 * rel(&blue, -law),
            mhz(zmax)
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut rep = Report { lines: Vec::new() };
    c1_baseline(&mut rep);
    fig2_checks(&mut rep);
    let fit = c4_c5(&mut rep);
    c6_c10(&mut rep);
    c7(&mut rep);
    c8(&mut rep);
    c9_c11(&mut rep, &fit);

    rep.lines.sort_by_key(|l| l.0);
    // Straight to stderr: the summary shows even when output is captured.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "\nacceptance summary");
    for (_, _, line) in &rep.lines {
        let _ = writeln!(err, "{line}");
    }
    drop(err);
    let unexpected: Vec<&String> = rep
        .lines
        .iter()
        .filter(|(n, pass, _)| *pass == KNOWN_DEVIATIONS.contains(n))
        .map(|l| &l.2)
        .collect();
    assert!(
        unexpected.is_empty(),
        "criteria differ from the documented outcome:\n{unexpected:#?}"
    );
}
