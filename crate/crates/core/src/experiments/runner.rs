use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::provenance::{run_text, scenario_text};
use super::{config_hash, AnalysisTag, CpPlan, RunSpec, Scenario};
use crate::analysis::{
    average_instantaneous, envelope_compare, fit_amplitude_sweep, magnitude_map_with,
    merge_delay_sweep, phase_shift, tracked_phase_shift, FixedTimeCut, MagnitudeMap, PhaseShift,
    ShiftFit, PARABOLA_FRACTION,
};
use crate::characteristics::{
    classify_condition, instantaneous_profile, trace_point, Condition, FrontVelocity, OracleConfig,
};
use crate::ddc::{magnitude, DdcPlan};
use crate::error::{Error, Result};
use crate::fdtd::{run, PortRecord, SolverConfig};
use crate::signal::add_gaussian_noise;
use crate::types::{ControlShape, Waveform, WavePacketSpec};

/// Magnitude gate for global phase estimates, relative to the peak.
const GATE: f64 = 0.5;
/// Looser gate for instantaneous traces, whose segments sit at different
/// offsets from `f_d` and so at different filter gains.
const TRACE_GATE: f64 = 0.2;
/// Fraction of the gated run dropped at each end as filter transients.
const EDGE: f64 = 0.25;
const TRACK_TOL: f64 = 1e3;
const PROFILE_POINTS: usize = 400;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every logical core.
    pub jobs: Option<usize>,
    /// Overrides the scenario's `output_dir`.
    pub output_dir: Option<PathBuf>,
    /// Overrides the noise seed.
    pub seed: Option<u64>,
    /// Keep every run's port record in memory.
    pub keep_records: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub wp: WavePacketSpec,
    pub cp_launch: Option<f64>,
    pub condition: Option<Condition>,
    /// Parabola-vertex shift (Hz) from the frequency sweep.
    pub sweep_shift: Option<f64>,
    pub peak_time: Option<f64>,
    pub fixed_cut: Option<FixedTimeCut>,
    /// Phase-method estimate; `mean` and `trace` are Δω in rad/s.
    pub phase: Option<PhaseShift>,
    /// Δω(t) over the looser trace gate, rad/s.
    pub trace: Option<Waveform>,
    /// Characteristics-oracle shift of the packet centre (Hz).
    pub oracle_shift: Option<f64>,
    /// `(exit time, Δf Hz)` across the packet.
    pub oracle_profile: Vec<(f64, f64)>,
    /// RMS of measured minus traced Δf_inst, relative to the traced peak,
    /// away from steps of the traced profile.
    pub tracking_error: Option<f64>,
    pub envelope_error: Option<f64>,
    /// Estimators that could not produce a value, with the reason.
    pub notes: Vec<String>,
    pub dir: Option<PathBuf>,
    pub record: Option<PortRecord>,
}

impl RunResult {
    pub fn phase_shift_hz(&self) -> Option<f64> {
        self.phase.as_ref().map(|p| p.mean / (2.0 * PI))
    }

    /// Preferred global shift (Hz): phase method, else sweep vertex.
    pub fn shift_hz(&self) -> Option<f64> {
        self.phase_shift_hz().or(self.sweep_shift)
    }
}

/// One point of the multi-packet averaged instantaneous shift.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitePoint {
    /// Delay of the packet point relative to the control launch (s).
    pub delay: f64,
    pub shift_hz: f64,
    pub packets: usize,
    pub oracle_hz: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub config_hash: String,
    pub runs: Vec<RunResult>,
    /// `(amplitude A, Δω rad/s)` fed to the fit.
    pub fit_points: Vec<(f64, f64)>,
    pub fit: Option<ShiftFit>,
    pub merged_map: Option<MagnitudeMap>,
    pub white_line: Vec<WhitePoint>,
    pub dir: Option<PathBuf>,
}

pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<ScenarioResult> {
    let mut s = s.clone();
    if let (Some(seed), Some(n)) = (opts.seed, s.noise.as_mut()) {
        n.seed = seed;
    }
    s.validate()?;
    let hash = config_hash(&s)?;
    let toml = s.to_toml()?;
    let dir = opts
        .output_dir
        .clone()
        .or_else(|| s.output_dir.clone())
        .map(|d| d.join(&s.name));
    if let Some(d) = &dir {
        create_dir(d)?;
        write(&d.join("config.toml"), &toml)?;
        write(&d.join("provenance.txt"), &scenario_text(&s, &hash, &toml))?;
    }
    let plan = DdcPlan::new(1.0 / s.line.magic_dt(), &s.filter)?;
    let runs = s.runs();
    let work = |r: &RunSpec| {
        run_one(&s, &plan, r, &hash, dir.as_deref(), opts.keep_records)
            .map_err(|e| Error::in_run(r.describe(), e))
    };
    let results: Vec<RunResult> = match opts.jobs.or(s.jobs) {
        Some(1) => runs.iter().map(work).collect::<Result<_>>()?,
        jobs => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::validation(e.to_string()))?;
            pool.install(|| runs.par_iter().map(work).collect::<Result<_>>())?
        }
    };

    let mut out = ScenarioResult {
        scenario: s.clone(),
        config_hash: hash,
        runs: results,
        fit_points: Vec::new(),
        fit: None,
        merged_map: None,
        white_line: Vec::new(),
        dir: dir.clone(),
    };
    if s.has(AnalysisTag::AmplitudeFit) {
        amplitude_fit(&mut out)?;
    }
    if s.has(AnalysisTag::DelayMerge) {
        delay_merge(&mut out)?;
    }
    if let Some(d) = &dir {
        write_scenario_files(&out, d)?;
    }
    Ok(out)
}

fn run_one(
    s: &Scenario,
    plan: &DdcPlan,
    spec: &RunSpec,
    hash: &str,
    root: Option<&Path>,
    keep: bool,
) -> Result<RunResult> {
    let wp = s.packet_for(spec);
    let cp = s.pulse_for(spec);
    let duration = s.duration_for(spec)?;
    let mut cfg = SolverConfig::for_line(&s.line, duration);
    cfg.shock_viscosity = s.solver.shock_viscosity;
    cfg.shock_threshold = s.solver.shock_threshold * s.line.i_star;
    cfg.coupling = s.solver.coupling;
    let (rec, _) = run(&s.line, Some(&wp), cp.as_ref(), &cfg)?;
    let out_port = wp.port.opposite();
    let mut out = rec.outgoing(out_port).clone();
    if let Some(n) = &s.noise {
        if n.sigma > 0.0 {
            out = add_gaussian_noise(&out, n.sigma, n.seed.wrapping_add(spec.index as u64))?;
        }
    }
    let f_in = wp.f_in();
    let mut notes = Vec::new();

    let condition = match &cp {
        Some(c) if matches!(c.shape, ControlShape::Rect { .. }) => {
            Some(classify_condition(spec.delay, &s.line, &wp, c)?)
        }
        _ => None,
    };

    // Frequency sweep: magnitude map and parabola vertex.
    let mut map = None;
    let mut sweep_shift = None;
    let mut peak_time = None;
    let mut fixed_cut = None;
    if let Some(axis) = s.sweep_axis() {
        let m = magnitude_map_with(plan, &out, &axis.values())?;
        let row = m.peak_row();
        let t = m.t_axis[row];
        peak_time = Some(t);
        fixed_cut = Some(FixedTimeCut {
            f_d_axis: m.f_d_axis.clone(),
            values: m.cut(row).to_vec(),
        });
        match crate::analysis::fit_parabola_peak(&m, t, PARABOLA_FRACTION) {
            Ok(f_out) => sweep_shift = Some(f_out - f_in),
            Err(e) => notes.push(format!("sweep: {e}")),
        }
        map = Some(m);
    }

    // Phase method.
    let mut phase = None;
    if let Some((f_d, track)) = s.fixed_fd() {
        let est = if track {
            let start = match sweep_shift {
                Some(d) => f_in + d,
                None => acquire(plan, &out, f_d, &s.filter)?,
            };
            tracked_phase_shift(plan, &out, f_in, start, GATE, TRACK_TOL)
        } else {
            phase_shift(plan, &out, f_in, f_d, GATE, 3, EDGE)
        };
        match est {
            Ok(p) => phase = Some(p),
            Err(e) => notes.push(format!("phase: {e}")),
        }
    }
    let f_final = phase
        .as_ref()
        .map(|p| p.f_d)
        .or(sweep_shift.map(|d| f_in + d))
        .unwrap_or(f_in);

    // Oracle.
    let ocfg = OracleConfig::default().with_front(FrontVelocity::Midpoint);
    let oracle_shift = Some(match &cp {
        Some(c) => {
            let r = trace_point(wp.delay + 0.5 * wp.tau_wp, wp.port, &s.line, Some(c), &ocfg)?;
            f_in * (r.omega_ratio - 1.0)
        }
        None => 0.0,
    });

    let mut trace = None;
    let mut oracle_profile = Vec::new();
    let mut tracking_error = None;
    if s.has(AnalysisTag::Instantaneous) || s.has(AnalysisTag::DelayMerge) {
        match phase_shift(plan, &out, f_in, f_final, TRACE_GATE, 3, EDGE) {
            Ok(p) => trace = Some(p.trace),
            Err(e) => notes.push(format!("trace: {e}")),
        }
        oracle_profile = instantaneous_profile(&s.line, &wp, cp.as_ref(), &ocfg, PROFILE_POINTS)?
            .into_iter()
            .map(|(t, dw)| (t, dw / (2.0 * PI)))
            .collect();
        if let Some(tr) = &trace {
            tracking_error = tracking_rms(tr, &oracle_profile, plan.settling_time());
        }
    }

    // Reference run without the control pulse.
    let needs_ref = cp.is_some()
        && (s.has(AnalysisTag::EnvelopeCompare) || s.has(AnalysisTag::FullTrace));
    let reference = if needs_ref {
        let (r, _) = run(&s.line, Some(&wp), None, &cfg)?;
        Some(r.outgoing(out_port).clone())
    } else {
        None
    };
    let mut envelope_error = None;
    let mut envelope_diff = None;
    if s.has(AnalysisTag::EnvelopeCompare) {
        if let Some(r) = &reference {
            let ref_env = magnitude(&plan.down_convert(r, f_in)?);
            let env = magnitude(&plan.down_convert(&out, f_final)?);
            match envelope_compare(&ref_env, &env) {
                Ok((d, worst)) => {
                    envelope_error = Some(worst);
                    envelope_diff = Some((ref_env, env, d));
                }
                Err(e) => notes.push(format!("envelope: {e}")),
            }
        }
    }

    let dir = root.map(|r| r.join(&spec.id));
    if let Some(d) = &dir {
        create_dir(d)?;
        let launches = (wp.delay, cp.as_ref().map(|c| c.delay));
        write(&d.join("provenance.txt"), &run_text(s, hash, spec, launches, duration))?;
        if s.output.write_ports {
            write(&d.join("ports.csv"), &ports_csv(&rec))?;
        }
        if let Some(m) = &map {
            write(&d.join("map.csv"), &m.to_csv("t_s"))?;
        }
        if s.output.write_iq {
            if let Some(p) = &phase {
                let tr = plan.down_convert(&out, p.f_d)?;
                write(&d.join(format!("iq_fd{:.6}GHz.csv", p.f_d / 1e9)), &tr.to_csv())?;
            }
        }
        if let Some(tr) = &trace {
            write(&d.join("inst.csv"), &inst_csv(tr, &oracle_profile))?;
        }
        if let Some((r, e, diff)) = &envelope_diff {
            write(&d.join("envelope.csv"), &envelope_csv(r, e, diff))?;
        }
        if s.has(AnalysisTag::FullTrace) {
            write(&d.join("trace.csv"), &trace_csv(&out, reference.as_ref()))?;
        }
        let mut fits = String::new();
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.9e}"));
        let _ = writeln!(fits, "condition = {}", condition.map_or("n/a", |c| c.label()));
        let _ = writeln!(fits, "sweep_shift_hz = {}", opt(sweep_shift));
        let _ = writeln!(fits, "phase_shift_hz = {}", opt(phase.as_ref().map(|p| p.mean / (2.0 * PI))));
        let _ = writeln!(fits, "phase_f_d_hz = {}", opt(phase.as_ref().map(|p| p.f_d)));
        let _ = writeln!(fits, "oracle_shift_hz = {}", opt(oracle_shift));
        let _ = writeln!(fits, "tracking_rms_rel = {}", opt(tracking_error));
        let _ = writeln!(fits, "envelope_max_diff = {}", opt(envelope_error));
        for n in &notes {
            let _ = writeln!(fits, "# {n}");
        }
        write(&d.join("fits.txt"), &fits)?;
    }

    Ok(RunResult {
        spec: spec.clone(),
        wp,
        cp_launch: cp.as_ref().map(|c| c.delay),
        condition,
        sweep_shift,
        peak_time,
        fixed_cut,
        phase,
        trace,
        oracle_shift,
        oracle_profile,
        tracking_error,
        envelope_error,
        notes,
        dir,
        record: keep.then_some(rec),
    })
}

/// Coarse carrier search around `f_d`: the down-conversion frequency with the
/// strongest response on a grid spaced well inside the filter passband, so
/// that tracking starts in band even for shifts beyond the cutoff.
fn acquire(plan: &DdcPlan, w: &Waveform, f_d: f64, filter: &crate::ddc::FilterSpec) -> Result<f64> {
    let step = 0.4 * filter.cutoff;
    let half = (0.1 * f_d / step).ceil() as usize;
    let grid: Vec<f64> = (0..=2 * half)
        .map(|k| f_d + (k as f64 - half as f64) * step)
        .filter(|&f| f > filter.cutoff)
        .collect();
    let m = magnitude_map_with(plan, w, &grid)?;
    let mut best = (f64::NEG_INFINITY, f_d);
    for (j, &f) in m.f_d_axis.iter().enumerate() {
        let peak = m.values.iter().map(|row| row[j]).fold(0.0f64, f64::max);
        if peak > best.0 {
            best = (peak, f);
        }
    }
    Ok(best.1)
}

/// Linear interpolation in a profile sorted by time; `None` outside it.
fn interp(profile: &[(f64, f64)], t: f64) -> Option<f64> {
    let k = profile.partition_point(|p| p.0 < t);
    if k == 0 || k == profile.len() {
        return None;
    }
    let (a, b) = (profile[k - 1], profile[k]);
    let s = if b.0 > a.0 { (t - a.0) / (b.0 - a.0) } else { 0.0 };
    Some(a.1 + s * (b.1 - a.1))
}

/// RMS of measured − traced Δf over trace samples farther than `settle`
/// from any step of the traced profile, relative to its peak |Δf|.
fn tracking_rms(trace: &Waveform, profile: &[(f64, f64)], settle: f64) -> Option<f64> {
    let peak = profile.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    if profile.len() < 2 || peak == 0.0 {
        return None;
    }
    let steps: Vec<f64> = profile
        .windows(2)
        .filter(|w| (w[1].1 - w[0].1).abs() > 0.02 * peak)
        .map(|w| 0.5 * (w[0].0 + w[1].0))
        .collect();
    let (mut sum, mut n) = (0.0, 0usize);
    for (k, &v) in trace.samples.iter().enumerate() {
        let t = trace.time_at(k);
        if steps.iter().any(|&s| (t - s).abs() < settle) {
            continue;
        }
        if let Some(o) = interp(profile, t) {
            let d = v / (2.0 * PI) - o;
            sum += d * d;
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt() / peak)
}

fn amplitude_fit(out: &mut ScenarioResult) -> Result<()> {
    let s = &out.scenario;
    let CpPlan::AmplitudeSweep { amplitudes, .. } = &s.cp else {
        return Ok(());
    };
    let mut points = Vec::new();
    for &a in amplitudes {
        let shifts: Vec<f64> = out
            .runs
            .iter()
            .filter(|r| r.spec.amplitude == Some(a))
            .filter(|r| {
                matches!(r.condition, None | Some(Condition::RedOnly) | Some(Condition::BlueOnly))
            })
            .filter_map(|r| r.shift_hz())
            .collect();
        if !shifts.is_empty() {
            points.push((a, 2.0 * PI * average_instantaneous(&shifts)?));
        }
    }
    // Falling fronts shift upwards; fit the mirrored data so that the same
    // law applies.
    let blue = points.iter().map(|p| p.1).sum::<f64>() > 0.0;
    let mirrored: Vec<(f64, f64)> = points
        .iter()
        .map(|&(a, w)| (a, if blue { -w } else { w }))
        .collect();
    out.fit = Some(fit_amplitude_sweep(&mirrored, s.wp.omega_in)?);
    out.fit_points = points;
    Ok(())
}

fn delay_merge(out: &mut ScenarioResult) -> Result<()> {
    let s = &out.scenario;
    let cuts: Vec<(f64, FixedTimeCut)> = out
        .runs
        .iter()
        .filter_map(|r| r.fixed_cut.clone().map(|c| (r.spec.delay, c)))
        .collect();
    if !cuts.is_empty() {
        out.merged_map = Some(merge_delay_sweep(&cuts)?);
    }

    // Each packet point is assigned the delay of its own launch relative to
    // the control launch, using the zero-current transit time; points deep
    // inside a packet (the central half of its gated run) are averaged.
    let tau_p = s.line.tau_p();
    let mut tracks: Vec<Vec<(f64, f64)>> = Vec::new();
    for r in &out.runs {
        let (Some(tr), Some(t_cp)) = (&r.trace, r.cp_launch) else {
            continue;
        };
        let n = tr.len();
        let drop = (EDGE * n as f64).floor() as usize;
        if n < 2 * drop + 2 {
            continue;
        }
        tracks.push(
            (drop..n - drop)
                .map(|k| (tr.time_at(k) - tau_p - t_cp, tr.samples[k] / (2.0 * PI)))
                .collect(),
        );
    }
    if tracks.is_empty() {
        return Ok(());
    }
    let mut delays = s.delays.clone();
    delays.sort_by(f64::total_cmp);
    delays.dedup();
    let step = if delays.len() > 1 {
        (delays[delays.len() - 1] - delays[0]) / (delays.len() - 1) as f64
    } else {
        s.wp.tau_wp / 8.0
    };
    let lo = tracks.iter().map(|t| t[0].0).fold(f64::INFINITY, f64::min);
    let hi = tracks.iter().map(|t| t[t.len() - 1].0).fold(f64::NEG_INFINITY, f64::max);
    let cp = s
        .pulse()
        .ok_or_else(|| Error::validation("delay merge needs a control pulse"))?
        .clone()
        .with_delay(0.0);
    let ocfg = OracleConfig::default().with_front(FrontVelocity::Midpoint);
    let mut g = (lo / step).ceil() * step;
    while g <= hi {
        let vals: Vec<f64> = tracks.iter().filter_map(|t| interp(t, g)).collect();
        if !vals.is_empty() {
            let o = trace_point(g, s.wp.port, &s.line, Some(&cp), &ocfg)?;
            out.white_line.push(WhitePoint {
                delay: g,
                shift_hz: average_instantaneous(&vals)?,
                packets: vals.len(),
                oracle_hz: s.wp.f_in() * (o.omega_ratio - 1.0),
            });
        }
        g += step;
    }
    Ok(())
}

/// Per-run comparison of the parabola-vertex, phase-derivative and oracle
/// shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub rows: Vec<CvRow>,
    pub max_vertex_phase: f64,
    pub max_vertex_oracle: f64,
    pub max_phase_oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub run: String,
    pub delay: f64,
    pub amplitude: Option<f64>,
    pub condition: Option<Condition>,
    pub vertex_hz: f64,
    pub phase_hz: f64,
    pub oracle_hz: f64,
}

impl CrossValidation {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,delay_s,amplitude_a,condition,vertex_hz,phase_hz,oracle_hz\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.9e},{},{},{:.9e},{:.9e},{:.9e}",
                r.run,
                r.delay,
                r.amplitude.map_or(String::new(), |a| format!("{a:.9e}")),
                r.condition.map_or("", |c| c.label()),
                r.vertex_hz,
                r.phase_hz,
                r.oracle_hz
            );
        }
        let _ = writeln!(
            out,
            "# max |vertex-phase| = {:.6e} Hz, max |vertex-oracle| = {:.6e} Hz, max |phase-oracle| = {:.6e} Hz",
            self.max_vertex_phase, self.max_vertex_oracle, self.max_phase_oracle
        );
        out
    }
}

/// Cross-validation table of an already computed result.
pub fn cross_validation(res: &ScenarioResult) -> Result<CrossValidation> {
    if res.scenario.sweep_axis().is_none() || res.scenario.fixed_fd().is_none() {
        return Err(Error::validation(
            "cross-validation needs both a frequency-sweep and a fixed-f_d plan",
        ));
    }
    let rows: Vec<CvRow> = res
        .runs
        .iter()
        .filter_map(|r| {
            Some(CvRow {
                run: r.spec.id.clone(),
                delay: r.spec.delay,
                amplitude: r.spec.amplitude,
                condition: r.condition,
                vertex_hz: r.sweep_shift?,
                phase_hz: r.phase_shift_hz()?,
                oracle_hz: r.oracle_shift?,
            })
        })
        .collect();
    let max = |f: &dyn Fn(&CvRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
    Ok(CrossValidation {
        max_vertex_phase: max(&|r| (r.vertex_hz - r.phase_hz).abs()),
        max_vertex_oracle: max(&|r| (r.vertex_hz - r.oracle_hz).abs()),
        max_phase_oracle: max(&|r| (r.phase_hz - r.oracle_hz).abs()),
        rows,
    })
}

/// Runs `s` and compares its two measurement methods with the oracle.
pub fn cross_validate(s: &Scenario, opts: &RunOptions) -> Result<(ScenarioResult, CrossValidation)> {
    if s.sweep_axis().is_none() || s.fixed_fd().is_none() {
        return Err(Error::validation(
            "cross-validation needs both a frequency-sweep and a fixed-f_d plan",
        ));
    }
    let res = run_scenario(s, opts)?;
    let cv = cross_validation(&res)?;
    if let Some(d) = &res.dir {
        write(&d.join("cross_validation.csv"), &cv.to_csv())?;
    }
    Ok((res, cv))
}

fn write_scenario_files(res: &ScenarioResult, d: &Path) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.9e}"));
    let mut sum = String::from(
        "run,delay_s,amplitude_a,envelope,condition,sweep_shift_hz,phase_shift_hz,phase_f_d_hz,oracle_shift_hz,tracking_rms_rel,envelope_max_diff\n",
    );
    for r in &res.runs {
        let _ = writeln!(
            sum,
            "{},{:.9e},{},{},{},{},{},{},{},{},{}",
            r.spec.id,
            r.spec.delay,
            opt(r.spec.amplitude),
            r.spec.envelope.map_or(String::new(), |e| e.to_string()),
            r.condition.map_or("", |c| c.label()),
            opt(r.sweep_shift),
            opt(r.phase_shift_hz()),
            opt(r.phase.as_ref().map(|p| p.f_d)),
            opt(r.oracle_shift),
            opt(r.tracking_error),
            opt(r.envelope_error)
        );
    }
    write(&d.join("summary.csv"), &sum)?;
    if let Some(fit) = &res.fit {
        let mut text = fit.to_text();
        text.push_str("# amplitude_a, shift_rad_s\n");
        for (a, w) in &res.fit_points {
            let _ = writeln!(text, "# {a:.9e}, {w:.9e}");
        }
        write(&d.join("fits.txt"), &text)?;
    }
    if let Some(m) = &res.merged_map {
        write(&d.join("map.csv"), &m.to_csv("delay_s"))?;
        write(&d.join("map.svg"), &m.to_svg(&res.scenario.name, "delay (s)"))?;
    }
    if !res.white_line.is_empty() {
        let mut w = String::from("delay_s,shift_hz,packets,oracle_hz\n");
        for p in &res.white_line {
            let _ = writeln!(w, "{:.9e},{:.9e},{},{:.9e}", p.delay, p.shift_hz, p.packets, p.oracle_hz);
        }
        write(&d.join("white_line.csv"), &w)?;
    }
    if res.scenario.sweep_axis().is_some() && res.scenario.fixed_fd().is_some() {
        write(&d.join("cross_validation.csv"), &cross_validation(res)?.to_csv())?;
    }
    Ok(())
}

fn ports_csv(rec: &PortRecord) -> String {
    let mut out = String::from("t_s,left_out_v,right_out_v,wp_in_a,cp_in_a\n");
    for k in 0..rec.left_out.len() {
        let _ = writeln!(
            out,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            rec.left_out.time_at(k),
            rec.left_out.samples[k],
            rec.right_out.samples[k],
            rec.wp_in.samples[k],
            rec.cp_in.samples[k]
        );
    }
    out
}

fn inst_csv(trace: &Waveform, profile: &[(f64, f64)]) -> String {
    let mut out = String::from("t_s,shift_hz,oracle_hz\n");
    for (k, v) in trace.samples.iter().enumerate() {
        let t = trace.time_at(k);
        let o = interp(profile, t).map_or(String::new(), |o| format!("{o:.9e}"));
        let _ = writeln!(out, "{t:.9e},{:.9e},{o}", v / (2.0 * PI));
    }
    out
}

fn envelope_csv(reference: &Waveform, shifted: &Waveform, diff: &Waveform) -> String {
    let mut out = String::from("t_s,reference,shifted,aligned_diff\n");
    for k in 0..reference.len() {
        let t = reference.time_at(k);
        let d = diff.value_at(t);
        let sh = if k < shifted.len() { shifted.samples[k] } else { 0.0 };
        let _ = writeln!(out, "{t:.9e},{:.9e},{sh:.9e},{d:.9e}", reference.samples[k]);
    }
    out
}

fn trace_csv(out: &Waveform, reference: Option<&Waveform>) -> String {
    let mut s = String::from("t_s,output_v,reference_v\n");
    for k in 0..out.len() {
        let r = reference.map_or(String::new(), |r| format!("{:.9e}", r.samples[k]));
        let _ = writeln!(s, "{:.9e},{:.9e},{r}", out.time_at(k), out.samples[k]);
    }
    s
}

fn create_dir(d: &Path) -> Result<()> {
    std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
