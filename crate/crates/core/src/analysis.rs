//! Estimators and fits on down-converted solver output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::ddc::{magnitude, phase_unwrapped, DdcPlan, FilterSpec, IQTrace};
use crate::error::{Error, Result};
use crate::types::Waveform;

/// Default "midmost part" of a fixed-time cut: points at or above this
/// fraction of the cut's maximum.
pub const PARABOLA_FRACTION: f64 = 0.7;
/// Envelope samples below this fraction of the reference peak are not compared.
pub const ENVELOPE_FLOOR: f64 = 0.1;

/// Magnitude on a (row, f_d) grid. Rows are output time for a single run, or
/// delay for a merged sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeMap {
    pub f_d_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    /// `values[row][col]`, row along `t_axis`, column along `f_d_axis`.
    pub values: Vec<Vec<f64>>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl MagnitudeMap {
    pub fn validate(&self) -> Result<()> {
        if !strictly_increasing(&self.f_d_axis) || !strictly_increasing(&self.t_axis) {
            return Err(Error::AxisMismatch("map axes must be strictly increasing".into()));
        }
        if self.values.len() != self.t_axis.len()
            || self.values.iter().any(|r| r.len() != self.f_d_axis.len())
        {
            return Err(Error::AxisMismatch(format!(
                "map body is not {}×{}",
                self.t_axis.len(),
                self.f_d_axis.len()
            )));
        }
        if self.values.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::validation("map values must be non-negative"));
        }
        Ok(())
    }

    /// Index of the row nearest `t`.
    pub fn row_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &x) in self.t_axis.iter().enumerate() {
            if (x - t).abs() < (self.t_axis[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// Row whose largest value is the largest in the map.
    pub fn peak_row(&self) -> usize {
        let row_max = |r: &Vec<f64>| r.iter().cloned().fold(0.0, f64::max);
        let mut best = 0;
        for (k, r) in self.values.iter().enumerate() {
            if row_max(r) > row_max(&self.values[best]) {
                best = k;
            }
        }
        best
    }

    /// Output time of the strongest response.
    pub fn peak_time(&self) -> f64 {
        self.t_axis[self.peak_row()]
    }

    pub fn cut(&self, row: usize) -> &[f64] {
        &self.values[row]
    }

    /// First column `t_s` (or the row label), header row of f_d values.
    pub fn to_csv(&self, row_label: &str) -> String {
        let mut s = String::from(row_label);
        for f in &self.f_d_axis {
            let _ = write!(s, ",{f:.6e}");
        }
        s.push('\n');
        for (t, row) in self.t_axis.iter().zip(&self.values) {
            let _ = write!(s, "{t:.6e}");
            for v in row {
                let _ = write!(s, ",{v:.9e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path, row_label: &str) -> Result<()> {
        std::fs::write(path, self.to_csv(row_label)).map_err(|e| Error::io(path, e))
    }

    pub fn to_svg(&self, title: &str, row_label: &str) -> String {
        let peak = self.values.iter().flatten().cloned().fold(0.0, f64::max);
        let mut h = crate::svg::Heatmap::new(title, "f_d (GHz)", row_label);
        let f: Vec<f64> = self.f_d_axis.iter().map(|f| f * 1e-9).collect();
        let t: Vec<f64> = self.t_axis.iter().map(|t| t * 1e9).collect();
        h.set_grid(&f, &t, |r, c| {
            if peak > 0.0 {
                self.values[r][c] / peak
            } else {
                0.0
            }
        });
        h.render()
    }
}

/// Stacks `magnitude(down_convert(w, f_d))` for every f_d.
pub fn magnitude_map(w: &Waveform, f_d_list: &[f64], filt: &FilterSpec) -> Result<MagnitudeMap> {
    if f_d_list.is_empty() || !strictly_increasing(f_d_list) {
        return Err(Error::validation("f_d list must be non-empty and strictly increasing"));
    }
    let plan = DdcPlan::new(w.sample_rate, filt)?;
    magnitude_map_with(&plan, w, f_d_list)
}

/// As [`magnitude_map`] with an already designed receiver.
pub fn magnitude_map_with(plan: &DdcPlan, w: &Waveform, f_d_list: &[f64]) -> Result<MagnitudeMap> {
    let columns: Vec<Waveform> = f_d_list
        .par_iter()
        .map(|&f| plan.down_convert(w, f).map(|tr| magnitude(&tr)))
        .collect::<Result<_>>()?;
    let t_axis: Vec<f64> = columns[0].times().collect();
    let values = (0..t_axis.len())
        .map(|r| columns.iter().map(|c| c.samples[r]).collect())
        .collect();
    Ok(MagnitudeMap {
        f_d_axis: f_d_list.to_vec(),
        t_axis,
        values,
    })
}

/// `n` evenly spaced frequencies from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Vertex of a least-squares parabola through the contiguous run of points
/// around the maximum that reach `fraction` of it.
pub fn fit_parabola_cut(f_axis: &[f64], cut: &[f64], fraction: f64) -> Result<f64> {
    if f_axis.len() != cut.len() {
        return Err(Error::AxisMismatch(format!(
            "cut has {} values for {} frequencies",
            cut.len(),
            f_axis.len()
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::validation(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let (arg, &max) = cut
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::InsufficientSupport { found: 0, needed: 5 })?;
    let thr = fraction * max;
    let mut lo = arg;
    while lo > 0 && cut[lo - 1] >= thr {
        lo -= 1;
    }
    let mut hi = arg;
    while hi + 1 < cut.len() && cut[hi + 1] >= thr {
        hi += 1;
    }
    let found = hi - lo + 1;
    if found < 5 {
        return Err(Error::InsufficientSupport { found, needed: 5 });
    }
    // Centre and scale the abscissa for conditioning.
    let f_c = f_axis[arg];
    let span = (f_axis[hi] - f_axis[lo]).max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = (lo..=hi).map(|k| (f_axis[k] - f_c) / span).collect();
    let ys: Vec<f64> = (lo..=hi).map(|k| cut[k] / max).collect();
    let [c0, c1, c2] = polyfit2(&xs, &ys)?;
    let _ = c0;
    if !(c2 < 0.0) {
        return Err(Error::FitDiverged(format!("parabola opens upwards (curvature {c2:e})")));
    }
    let vertex = f_c - c1 / (2.0 * c2) * span;
    if !(vertex >= f_axis[lo] && vertex <= f_axis[hi]) {
        return Err(Error::FitDiverged(format!(
            "vertex {vertex:.6e} Hz outside the fitted band [{:.6e}, {:.6e}]",
            f_axis[lo], f_axis[hi]
        )));
    }
    Ok(vertex)
}

/// Least-squares `y = c0 + c1·x + c2·x²`.
fn polyfit2(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let p = [1.0, x, x * x];
        for i in 0..3 {
            r[i] += p[i] * y;
            for j in 0..3 {
                m[i][j] += p[i] * p[j];
            }
        }
    }
    solve3(m, r).ok_or_else(|| Error::FitDiverged("singular normal equations".into()))
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let k = m[row][col] / m[col][col];
            for c in col..3 {
                m[row][c] -= k * m[col][c];
            }
            r[row] -= k * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| m[i][j] * x[j]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Output carrier frequency from the cut at the row nearest `t_cut`.
pub fn fit_parabola_peak(map: &MagnitudeMap, t_cut: f64, fraction: f64) -> Result<f64> {
    map.validate()?;
    if t_cut < map.t_axis[0] || t_cut > *map.t_axis.last().unwrap() {
        return Err(Error::validation(format!("t_cut {t_cut:e} s outside the map")));
    }
    fit_parabola_cut(&map.f_d_axis, map.cut(map.row_near(t_cut)), fraction)
}

pub fn global_shift(f_out: f64, f_in: f64) -> f64 {
    f_out - f_in
}

/// Quadratic-plus-quartic fit of shift versus control amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFit {
    pub i_star_hat: f64,
    pub c4_hat: f64,
    /// Fitted Δω = a·i² + b·i⁴ (rad/s per A², rad/s per A⁴).
    pub a: f64,
    pub b: f64,
    pub residual_rms: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub var_i_star: f64,
    pub var_c4: f64,
    pub n_points: usize,
}

impl ShiftFit {
    pub fn to_text(&self) -> String {
        format!(
            "i_star_hat_a = {:.9e}\nc4_hat = {:.9e}\na_rad_s_per_a2 = {:.9e}\nb_rad_s_per_a4 = {:.9e}\nresidual_rms_rad_s = {:.9e}\nvar_a = {:.9e}\nvar_b = {:.9e}\nvar_i_star = {:.9e}\nvar_c4 = {:.9e}\nn_points = {}\n",
            self.i_star_hat,
            self.c4_hat,
            self.a,
            self.b,
            self.residual_rms,
            self.var_a,
            self.var_b,
            self.var_i_star,
            self.var_c4,
            self.n_points
        )
    }

    /// Shift predicted by the fit (rad/s).
    pub fn eval(&self, i: f64) -> f64 {
        let u = i * i;
        self.a * u + self.b * u * u
    }
}

/// Least squares on Δω = a·i² + b·i⁴.
///
/// `a = −ω_in/(4·I*²)` gives `I*`; with Δω = −(ω_in/4)·[(i/I*)² + c4·(i/I*)⁴]
/// the quartic coefficient maps to `c4 = −4·b·I*⁴/ω_in`.
pub fn fit_amplitude_sweep(points: &[(f64, f64)], omega_in: f64) -> Result<ShiftFit> {
    let n = points.len();
    if n < 6 {
        return Err(Error::InsufficientSupport { found: n, needed: 6 });
    }
    let i_abs: Vec<f64> = points.iter().map(|p| p.0.abs()).collect();
    let i_max = i_abs.iter().cloned().fold(0.0, f64::max);
    let i_min = i_abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(i_min > 0.0) || i_max < 4.0 * i_min {
        return Err(Error::validation(
            "amplitude sweep must span at least a factor 4 in control current",
        ));
    }
    if !(omega_in > 0.0) {
        return Err(Error::validation("omega_in must be positive"));
    }
    // Scaled regressors s = (i/i_max)²; y scaled by ω_in.
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(i, dw) in points {
        let s = (i / i_max).powi(2);
        let y = dw / omega_in;
        s11 += s * s;
        s12 += s * s * s;
        s22 += s * s * s * s;
        r1 += s * y;
        r2 += s * s * y;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-300) {
        return Err(Error::FitDiverged("singular amplitude-sweep normal equations".into()));
    }
    let a_s = (r1 * s22 - r2 * s12) / det;
    let b_s = (s11 * r2 - s12 * r1) / det;
    let a = a_s * omega_in / (i_max * i_max);
    let b = b_s * omega_in / i_max.powi(4);
    if a >= 0.0 {
        return Err(Error::SignError { a });
    }
    let rss: f64 = points
        .iter()
        .map(|&(i, dw)| {
            let u = i * i;
            (dw - a * u - b * u * u).powi(2)
        })
        .sum();
    let sigma2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    // (XᵀX)⁻¹ in scaled coordinates, then unscaled.
    let var_a_s = sigma2 / (omega_in * omega_in) * s22 / det;
    let var_b_s = sigma2 / (omega_in * omega_in) * s11 / det;
    let cov_ab_s = -sigma2 / (omega_in * omega_in) * s12 / det;
    let ka = omega_in / (i_max * i_max);
    let kb = omega_in / i_max.powi(4);
    let var_a = var_a_s * ka * ka;
    let var_b = var_b_s * kb * kb;
    let cov_ab = cov_ab_s * ka * kb;
    let i_star_hat = (-omega_in / (4.0 * a)).sqrt();
    let c4_hat = -4.0 * b * i_star_hat.powi(4) / omega_in;
    // Linear error propagation: I* = (−ω/4a)^½, c4 = −ω·b/(4a²).
    let di_da = -i_star_hat / (2.0 * a);
    let var_i_star = di_da * di_da * var_a;
    let dc_da = omega_in * b / (2.0 * a.powi(3));
    let dc_db = -omega_in / (4.0 * a * a);
    let var_c4 = dc_da * dc_da * var_a + dc_db * dc_db * var_b + 2.0 * dc_da * dc_db * cov_ab;
    Ok(ShiftFit {
        i_star_hat,
        c4_hat,
        a,
        b,
        residual_rms: (rss / n as f64).sqrt(),
        var_a,
        var_b,
        var_i_star,
        var_c4,
        n_points: n,
    })
}

/// Pointwise normalised envelope difference after cross-correlation alignment.
///
/// Both envelopes are scaled to unit peak first: the comparison is of shape,
/// since impedance and filter gain change the absolute level slightly.
/// Returns the difference on the reference grid, restricted to samples where
/// the reference reaches [`ENVELOPE_FLOOR`] of its peak, and its largest
/// absolute value.
pub fn envelope_compare(reference: &Waveform, shifted: &Waveform) -> Result<(Waveform, f64)> {
    let rp = reference.peak_abs();
    let sp = shifted.peak_abs();
    if !(rp > 0.0 && sp > 0.0) {
        return Err(Error::AlignmentFailed("an envelope is identically zero".into()));
    }
    let (r_lo, r_hi) = support(reference);
    let (s_lo, s_hi) = support(shifted);
    if r_hi < s_lo || s_hi < r_lo {
        return Err(Error::AlignmentFailed(format!(
            "supports [{r_lo:.3e}, {r_hi:.3e}] s and [{s_lo:.3e}, {s_hi:.3e}] s do not overlap"
        )));
    }
    let lag = align_lag(reference, shifted)?;
    let thr = ENVELOPE_FLOOR * rp;
    let idx: Vec<usize> = (0..reference.len())
        .filter(|&k| reference.samples[k] >= thr)
        .collect();
    let (lo, hi) = (idx[0], *idx.last().unwrap());
    let mut diff = Vec::with_capacity(hi - lo + 1);
    let mut worst = 0.0f64;
    for k in lo..=hi {
        let t = reference.time_at(k);
        let ts = t + lag;
        if ts < shifted.t0 || ts > shifted.t_end() {
            return Err(Error::AlignmentFailed(
                "aligned shifted envelope does not cover the reference support".into(),
            ));
        }
        let d = sample_near(shifted, ts) / sp - reference.samples[k] / rp;
        let d = if reference.samples[k] >= thr { d } else { 0.0 };
        worst = worst.max(d.abs());
        diff.push(d);
    }
    Ok((Waveform::new(reference.sample_rate, reference.time_at(lo), diff)?, worst))
}

/// Time span where `w` reaches [`ENVELOPE_FLOOR`] of its peak.
fn support(w: &Waveform) -> (f64, f64) {
    let thr = ENVELOPE_FLOOR * w.peak_abs();
    let first = w.samples.iter().position(|v| v.abs() >= thr).unwrap_or(0);
    let last = w.samples.iter().rposition(|v| v.abs() >= thr).unwrap_or(0);
    (w.time_at(first), w.time_at(last))
}

/// Value at `t`, taking the stored sample when `t` falls on the grid.
fn sample_near(w: &Waveform, t: f64) -> f64 {
    let pos = (t - w.t0) * w.sample_rate;
    let k = pos.round();
    if (pos - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < w.len() {
        w.samples[k as usize]
    } else {
        w.value_at(t)
    }
}

/// Time offset maximising ∫ ref(t)·shifted(t + lag) dt, refined to sub-sample
/// precision with a parabola through the three best lags.
fn align_lag(reference: &Waveform, shifted: &Waveform) -> Result<f64> {
    let dt = reference.dt();
    let lo_t = shifted.t0 - reference.t_end();
    let hi_t = shifted.t_end() - reference.t0;
    if !(hi_t > lo_t) {
        return Err(Error::AlignmentFailed("supports do not overlap".into()));
    }
    // Lags on an integer grid of reference samples, so zero lag is exact.
    let k_lo = (lo_t / dt).floor() as i64;
    let k_hi = (hi_t / dt).ceil() as i64;
    let n = (k_hi - k_lo) as usize + 1;
    let score = |lag: f64| -> f64 {
        reference
            .samples
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let ts = reference.time_at(k) + lag;
                if ts < shifted.t0 || ts > shifted.t_end() {
                    0.0
                } else {
                    r * shifted.value_at(ts)
                }
            })
            .sum()
    };
    let scores: Vec<f64> = (0..n).map(|k| score((k_lo + k as i64) as f64 * dt)).collect();
    let (best, &peak) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if !(peak > 0.0) {
        return Err(Error::AlignmentFailed("no positive overlap between envelopes".into()));
    }
    let mut lag = (k_lo + best as i64) as f64 * dt;
    if best > 0 && best + 1 < n {
        let (a, b, c) = (scores[best - 1], scores[best], scores[best + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            let frac = 0.5 * (a - c) / den;
            if frac.abs() > 1e-6 {
                lag += frac * dt;
            }
        }
    }
    Ok(lag)
}

/// One fixed-time cut of a frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTimeCut {
    pub f_d_axis: Vec<f64>,
    pub values: Vec<f64>,
}

/// Row-stacks per-delay cuts, ordered by delay.
pub fn merge_delay_sweep(cuts: &[(f64, FixedTimeCut)]) -> Result<MagnitudeMap> {
    let first = cuts
        .first()
        .ok_or_else(|| Error::validation("no cuts to merge"))?;
    let axis = &first.1.f_d_axis;
    for (d, c) in cuts {
        if &c.f_d_axis != axis || c.values.len() != axis.len() {
            return Err(Error::AxisMismatch(format!(
                "cut at delay {d:e} s does not share the f_d axis"
            )));
        }
    }
    let mut order: Vec<usize> = (0..cuts.len()).collect();
    order.sort_by(|&a, &b| cuts[a].0.total_cmp(&cuts[b].0));
    let map = MagnitudeMap {
        f_d_axis: axis.clone(),
        t_axis: order.iter().map(|&k| cuts[k].0).collect(),
        values: order.iter().map(|&k| cuts[k].1.values.clone()).collect(),
    };
    map.validate()?;
    Ok(map)
}

/// Mean of per-packet shifts taken at a shared delay.
pub fn average_instantaneous(per_packet: &[f64]) -> Result<f64> {
    if per_packet.is_empty() {
        return Err(Error::validation("no packets to average"));
    }
    Ok(per_packet.iter().sum::<f64>() / per_packet.len() as f64)
}

/// Phase-method shift measured at one down-conversion frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShift {
    pub f_d: f64,
    /// Δω = ω_out − ω_in (rad/s) over the gated samples.
    pub trace: Waveform,
    /// Least-squares phase slope over the interior of the gate, as Δω (rad/s).
    pub mean: f64,
}

/// Δω(t) relative to `f_in` from one down-conversion at `f_d`.
///
/// The interior estimate drops `edge` (fraction) of the gated run at each end,
/// where filter transients bias the phase unless `f_d` sits on the carrier.
pub fn phase_shift(
    plan: &DdcPlan,
    w: &Waveform,
    f_in: f64,
    f_d: f64,
    gate: f64,
    smoothing: usize,
    edge: f64,
) -> Result<PhaseShift> {
    let tr = plan.down_convert(w, f_d)?;
    phase_shift_from(&tr, f_in, gate, smoothing, edge)
}

pub fn phase_shift_from(
    tr: &IQTrace,
    f_in: f64,
    gate: f64,
    smoothing: usize,
    edge: f64,
) -> Result<PhaseShift> {
    let phase = phase_unwrapped(tr, gate)?;
    let offset = 2.0 * PI * (tr.f_d - f_in);
    let n = phase.len();
    if n < 3 {
        return Err(Error::InsufficientSupport { found: n, needed: 3 });
    }
    let trace = if n >= smoothing.max(3) {
        crate::ddc::instantaneous_shift(&phase, smoothing)?
    } else {
        crate::ddc::instantaneous_shift(&phase, 3)?
    };
    let trace = Waveform::new(
        trace.sample_rate,
        trace.t0,
        trace.samples.iter().map(|v| v + offset).collect(),
    )?;
    let drop = ((edge.clamp(0.0, 0.45)) * n as f64).floor() as usize;
    let (lo, hi) = if n - 2 * drop >= 3 { (drop, n - drop) } else { (0, n) };
    let slope = line_slope(&phase, lo, hi);
    Ok(PhaseShift {
        f_d: tr.f_d,
        trace,
        mean: offset - slope,
    })
}

fn line_slope(w: &Waveform, lo: usize, hi: usize) -> f64 {
    let m = (hi - lo) as f64;
    let ts: Vec<f64> = (lo..hi).map(|k| k as f64 / w.sample_rate).collect();
    let tm = ts.iter().sum::<f64>() / m;
    let ym = w.samples[lo..hi].iter().sum::<f64>() / m;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(&w.samples[lo..hi]) {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    num / den
}

/// Mean phase-method shift with `f_d` re-centred on the measured carrier until
/// it moves by less than `tol` Hz. At the fixed point the carrier sits at DC,
/// where filter transients no longer tilt the phase.
pub fn tracked_phase_shift(
    plan: &DdcPlan,
    w: &Waveform,
    f_in: f64,
    f_start: f64,
    gate: f64,
    tol: f64,
) -> Result<PhaseShift> {
    let mut f_d = f_start;
    let mut last = None;
    for _ in 0..12 {
        let est = phase_shift(plan, w, f_in, f_d, gate, 3, 0.25)?;
        let f_out = f_in + est.mean / (2.0 * PI);
        let moved = (f_out - f_d).abs();
        last = Some(est);
        if moved < tol {
            break;
        }
        f_d = f_out;
    }
    last.ok_or_else(|| Error::FitDiverged("tracking did not run".into()))
}

/// Global shift (Hz) from a frequency sweep: parabola vertex of the cut at the
/// time of strongest response.
pub fn sweep_shift(
    plan: &DdcPlan,
    w: &Waveform,
    f_in: f64,
    f_d_list: &[f64],
) -> Result<(f64, MagnitudeMap)> {
    let map = magnitude_map_with(plan, w, f_d_list)?;
    let t = map.peak_time();
    let f_out = fit_parabola_peak(&map, t, PARABOLA_FRACTION)?;
    Ok((global_shift(f_out, f_in), map))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::signal::tone;

    fn sinc2_cut(centre: f64, f: &[f64]) -> Vec<f64> {
        f.iter()
            .map(|&x| {
                let a = PI * (x - centre) / 60e6;
                if a == 0.0 {
                    1.0
                } else {
                    (a.sin() / a).powi(2)
                }
            })
            .collect()
    }

    #[test]
    fn parabola_on_symmetric_cut() {
        let f = linspace(3.8e9, 4.2e9, 201);
        let v = fit_parabola_cut(&f, &sinc2_cut(4.0e9, &f), PARABOLA_FRACTION).unwrap();
        assert!((v - 4.0e9).abs() < 2e6);
        let off = fit_parabola_cut(&f, &sinc2_cut(3.931e9, &f), PARABOLA_FRACTION).unwrap();
        assert!((off - 3.931e9).abs() < 2e6, "{off}");
    }

    #[test]
    fn parabola_support_errors() {
        let f = linspace(3.8e9, 4.2e9, 5);
        let cut = vec![0.0, 0.1, 1.0, 0.1, 0.0];
        assert!(matches!(
            fit_parabola_cut(&f, &cut, 0.7),
            Err(Error::InsufficientSupport { found: 1, .. })
        ));
        let f = linspace(0.0, 6.0, 7);
        // Edge maximum: vertex lies outside the rising run.
        let cut = vec![0.80, 0.82, 0.85, 0.88, 0.92, 0.96, 1.0];
        assert!(matches!(fit_parabola_cut(&f, &cut, 0.7), Err(Error::FitDiverged(_))));
    }

    #[test]
    fn global_shift_arithmetic() {
        assert_eq!(global_shift(4.0e9, 4.0e9), 0.0);
        assert_relative_eq!(global_shift(3.93e9, 4.0e9), -70e6, max_relative = 1e-9);
    }

    #[test]
    fn tone_map_has_one_band() {
        let w = tone(4.01e9, 1.0, 0.0, 160e9, 0.0, 60e-9);
        let f = linspace(3.9e9, 4.1e9, 41);
        let map = magnitude_map(&w, &f, &FilterSpec::default()).unwrap();
        map.validate().unwrap();
        // The receiver's passband is flat-topped, so only the vertex of the
        // symmetric cut is meaningful, not its argmax.
        let row = map.row_near(30e-9);
        assert!(map.values[row][22] > 0.45 && map.values[row][0] < 0.01);
        let v = fit_parabola_peak(&map, 30e-9, PARABOLA_FRACTION).unwrap();
        assert!((v - 4.01e9).abs() < 1e6, "{v}");
        let csv = map.to_csv("t_s");
        assert_eq!(csv.lines().count(), 1 + map.t_axis.len());
    }

    #[test]
    fn tracking_finds_a_far_tone() {
        let w = tone(4.0e9 + 75e6, 1.0, 0.3, 160e9, 0.0, 40e-9);
        let plan = DdcPlan::new(160e9, &FilterSpec::default()).unwrap();
        let est = tracked_phase_shift(&plan, &w, 4.0e9, 4.05e9, 0.5, 1e3).unwrap();
        assert!((est.mean / (2.0 * PI) - 75e6).abs() < 0.05e6, "{}", est.mean / (2.0 * PI));
    }

    #[test]
    fn amplitude_fit_exact_quadratic() {
        let omega = 2.0 * PI * 4e9;
        let i_star = 6.15e-3;
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|k| {
                let i = 0.2e-3 * k as f64;
                (i, -omega / 4.0 * (i / i_star).powi(2))
            })
            .collect();
        let fit = fit_amplitude_sweep(&pts, omega).unwrap();
        assert_relative_eq!(fit.i_star_hat, i_star, max_relative = 1e-12);
        assert!(fit.c4_hat.abs() < 1e-9);
        assert!(fit.residual_rms < 1e-3);
        assert!(fit.to_text().contains("i_star_hat_a"));
    }

    #[test]
    fn amplitude_fit_errors() {
        let omega = 2.0 * PI * 4e9;
        let few: Vec<(f64, f64)> = (1..=5).map(|k| (k as f64 * 1e-4, -1.0)).collect();
        assert!(fit_amplitude_sweep(&few, omega).is_err());
        let narrow: Vec<(f64, f64)> = (0..8).map(|k| (1e-3 + k as f64 * 1e-4, -1e6)).collect();
        assert!(matches!(fit_amplitude_sweep(&narrow, omega), Err(Error::Validation(_))));
        let blue: Vec<(f64, f64)> = (1..=8)
            .map(|k| {
                let i = 0.25e-3 * k as f64;
                (i, 1e9 * i * i)
            })
            .collect();
        assert!(matches!(fit_amplitude_sweep(&blue, omega), Err(Error::SignError { .. })));
    }

    #[test]
    fn envelope_identity_and_offset() {
        let env = |t: f64| (-((t - 20e-9) / 4e-9).powi(2)).exp();
        let a = Waveform::new(1e9, 0.0, (0..40).map(|k| env(k as f64 * 1e-9)).collect()).unwrap();
        let (d, m) = envelope_compare(&a, &a).unwrap();
        assert_eq!(m, 0.0);
        assert!(d.samples.iter().all(|v| *v == 0.0));
        // Delayed and scaled copy: alignment and normalisation remove both.
        let b = Waveform::new(1e9, 7.3e-9, a.samples.iter().map(|v| 0.8 * v).collect()).unwrap();
        let (_, m) = envelope_compare(&a, &b).unwrap();
        assert!(m < 0.01, "{m}");
        let far = Waveform::new(1e9, 1e-6, a.samples.clone()).unwrap();
        assert!(envelope_compare(&a, &far).is_err());
    }

    #[test]
    fn merge_orders_rows() {
        let axis = vec![1.0, 2.0, 3.0];
        let cut = |v: f64| FixedTimeCut {
            f_d_axis: axis.clone(),
            values: vec![v; 3],
        };
        let fwd = merge_delay_sweep(&[(1.0, cut(1.0)), (2.0, cut(2.0))]).unwrap();
        let rev = merge_delay_sweep(&[(2.0, cut(2.0)), (1.0, cut(1.0))]).unwrap();
        assert_eq!(fwd, rev);
        let single = merge_delay_sweep(&[(0.5, cut(3.0))]).unwrap();
        assert_eq!(single.values.len(), 1);
        let bad = FixedTimeCut {
            f_d_axis: vec![1.0, 2.0],
            values: vec![0.0; 2],
        };
        assert!(matches!(
            merge_delay_sweep(&[(1.0, cut(1.0)), (2.0, bad)]),
            Err(Error::AxisMismatch(_))
        ));
    }

    #[test]
    fn averaging() {
        assert!(average_instantaneous(&[]).is_err());
        assert_eq!(average_instantaneous(&[5.0, 5.0, 5.0]).unwrap(), 5.0);
        assert_relative_eq!(average_instantaneous(&[-80e6, -82e6]).unwrap(), -81e6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parabola_scale_invariant(scale in 1e-6f64..1e6, centre in 3.9e9f64..4.1e9) {
            let f = linspace(3.8e9, 4.2e9, 201);
            let cut = sinc2_cut(centre, &f);
            let scaled: Vec<f64> = cut.iter().map(|v| v * scale).collect();
            let a = fit_parabola_cut(&f, &cut, PARABOLA_FRACTION).unwrap();
            let b = fit_parabola_cut(&f, &scaled, PARABOLA_FRACTION).unwrap();
            prop_assert!((a - b).abs() < 1e-3 * (f[1] - f[0]));
        }

        #[test]
        fn amplitude_fit_recovers_i_star(i_star in 3e-3f64..20e-3) {
            let omega = 2.0 * PI * 4e9;
            let pts: Vec<(f64, f64)> = (1..=12)
                .map(|k| {
                    let i = 0.18e-3 * k as f64;
                    (i, crate::line::shift_from_current(omega, i, &crate::types::LineSpec {
                        i_star,
                        i_crit: i_star * 0.9,
                        ..Default::default()
                    }).unwrap())
                })
                .collect();
            let fit = fit_amplitude_sweep(&pts, omega).unwrap();
            prop_assert!(((fit.i_star_hat - i_star) / i_star).abs() < 1e-10);
        }
    }
}
