//! Ray tracing of wave-packet points through a prescribed, rigidly moving
//! control-pulse field.
//!
//! The control pulse is not solved here: its current profile translates at a
//! fixed front velocity, which keeps this module independent of the FDTD code.
//! Across a rigid pattern moving at `v_f` the quantity ω·(1 − v_f/v) is
//! conserved, so the accumulated ratio is the product of the Doppler ratios of
//! every (possibly infinitesimal) interface crossed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::{compose_doppler, phase_velocity, DopplerArgs};
use crate::types::{ControlPulseSpec, ControlShape, LineSpec, Port, WavePacketSpec};

/// Speed at which the prescribed control-pulse pattern travels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum FrontVelocity {
    /// Zero-current phase velocity v0.
    #[default]
    ZeroCurrent,
    /// Fixed speed in m/s.
    Fixed(f64),
    /// Phase velocity at half the pulse's peak current. A rising front spreads
    /// into a fan and a falling one steepens into a shock; both travel close to
    /// this speed on average.
    Midpoint,
}

impl FrontVelocity {
    pub fn speed(&self, line: &LineSpec, cp: &ControlPulseSpec) -> Result<f64> {
        let v = match *self {
            FrontVelocity::ZeroCurrent => line.v0(),
            FrontVelocity::Fixed(v) => v,
            FrontVelocity::Midpoint => phase_velocity(0.5 * cp.peak_current(), line)?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("front velocity must be positive, got {v}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub front: FrontVelocity,
    /// Integration step (s). Zero means the line's magic time step.
    pub step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            front: FrontVelocity::ZeroCurrent,
            step: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn with_front(mut self, front: FrontVelocity) -> Self {
        self.front = front;
        self
    }

    fn step_for(&self, line: &LineSpec) -> f64 {
        if self.step > 0.0 {
            self.step.min(line.magic_dt())
        } else {
            line.magic_dt()
        }
    }
}

/// One front crossed by a ray, merged from consecutive same-sign current changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Distance from the ray's input port (m).
    pub x: f64,
    pub t: f64,
    pub i_from: f64,
    pub i_to: f64,
}

impl Crossing {
    pub fn delta_i(&self) -> f64 {
        self.i_to - self.i_from
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayResult {
    pub entry_time: f64,
    pub exit_time: f64,
    pub omega_ratio: f64,
    pub crossings: Vec<Crossing>,
}

/// Prescribed control-pulse field in the frame of a ray entering at `port`.
struct Field<'a> {
    cp: Option<&'a ControlPulseSpec>,
    length: f64,
    v_front: f64,
    co_moving: bool,
}

impl<'a> Field<'a> {
    fn new(
        port: Port,
        line: &LineSpec,
        cp: Option<&'a ControlPulseSpec>,
        cfg: &OracleConfig,
    ) -> Result<Self> {
        let (v_front, co_moving) = match cp {
            Some(c) => (cfg.front.speed(line, c)?, c.port == port),
            None => (line.v0(), false),
        };
        Ok(Field {
            cp,
            length: line.length,
            v_front,
            co_moving,
        })
    }

    /// Current at distance `x` from the ray's input port.
    fn current(&self, x: f64, t: f64) -> f64 {
        let Some(cp) = self.cp else { return 0.0 };
        let travelled = if self.co_moving { x } else { self.length - x };
        cp.current_at(t - travelled / self.v_front)
    }

    /// Front velocity signed along the ray's direction.
    fn signed_front(&self) -> f64 {
        if self.co_moving {
            self.v_front
        } else {
            -self.v_front
        }
    }
}

fn trace_inner(
    entry_time: f64,
    port: Port,
    line: &LineSpec,
    cp: Option<&ControlPulseSpec>,
    cfg: &OracleConfig,
    mut path: Option<&mut Vec<(f64, f64, f64)>>,
) -> Result<RayResult> {
    let field = Field::new(port, line, cp, cfg)?;
    let h = cfg.step_for(line);
    let vel = |x: f64, t: f64| phase_velocity(field.current(x, t), line);

    let mut x = 0.0;
    let mut t = entry_time;
    let mut i_now = field.current(x, t);
    let mut crossings: Vec<Crossing> = Vec::new();
    // Direction of the crossing currently being accumulated.
    let mut open: Option<f64> = None;
    let max_steps = (100.0 * line.tau_p() / h).ceil() as usize;

    for _ in 0..max_steps {
        // Midpoint RK2.
        let k1 = vel(x, t)?;
        let k2 = vel(x + 0.5 * h * k1, t + 0.5 * h)?;
        let (x_next, t_next) = if x + h * k2 >= line.length {
            let frac = (line.length - x) / (h * k2);
            (line.length, t + frac * h)
        } else {
            (x + h * k2, t + h)
        };
        let i_next = field.current(x_next, t_next);
        let di = i_next - i_now;
        if di != 0.0 {
            match (open, crossings.last_mut()) {
                (Some(sign), Some(last)) if sign == di.signum() => {
                    last.i_to = i_next;
                    last.x = x_next;
                    last.t = t_next;
                }
                _ => {
                    crossings.push(Crossing {
                        x: x_next,
                        t: t_next,
                        i_from: i_now,
                        i_to: i_next,
                    });
                    open = Some(di.signum());
                }
            }
        } else {
            open = None;
        }
        x = x_next;
        t = t_next;
        i_now = i_next;
        if let Some(p) = path.as_deref_mut() {
            p.push((t, x, i_now));
        }
        if x >= line.length {
            let omega_ratio = ratio_of(&crossings, field.signed_front(), line)?;
            return Ok(RayResult {
                entry_time,
                exit_time: t,
                omega_ratio,
                crossings,
            });
        }
    }
    Err(Error::validation(format!(
        "ray entering at {entry_time:e} s did not reach the far port"
    )))
}

fn ratio_of(crossings: &[Crossing], v_front: f64, line: &LineSpec) -> Result<f64> {
    let args = crossing_args(crossings, v_front, line)?;
    compose_doppler(1.0, &args)
}

/// Doppler arguments of a crossing list for a pattern moving at `v_front`
/// (signed along the ray).
pub fn crossing_args(
    crossings: &[Crossing],
    v_front: f64,
    line: &LineSpec,
) -> Result<Vec<DopplerArgs>> {
    crossings
        .iter()
        .map(|c| {
            Ok(DopplerArgs::new(
                v_front,
                phase_velocity(c.i_from, line)?,
                phase_velocity(c.i_to, line)?,
            ))
        })
        .collect()
}

/// Traces one packet point entering at `port` at `entry_time`.
pub fn trace_point(
    entry_time: f64,
    port: Port,
    line: &LineSpec,
    cp: Option<&ControlPulseSpec>,
    cfg: &OracleConfig,
) -> Result<RayResult> {
    trace_inner(entry_time, port, line, cp, cfg, None)
}

/// Signed front velocity (along the ray) used by [`trace_point`].
pub fn signed_front_velocity(
    port: Port,
    line: &LineSpec,
    cp: &ControlPulseSpec,
    cfg: &OracleConfig,
) -> Result<f64> {
    Ok(Field::new(port, line, Some(cp), cfg)?.signed_front())
}

/// Output frequency (rad/s) of the packet point leaving at `exit_time`, from
/// the control current present at the output port at that moment.
///
/// Valid for points that crossed the pulse's leading edge inside the device.
pub fn predict_instantaneous(
    exit_time: f64,
    line: &LineSpec,
    wp: &WavePacketSpec,
    cp: Option<&ControlPulseSpec>,
) -> Result<f64> {
    let Some(cp) = cp else { return Ok(wp.omega_in) };
    let at_output = if cp.port == wp.port {
        cp.current_at(exit_time - line.tau_p())
    } else {
        cp.current_at(exit_time)
    };
    Ok(wp.omega_in + crate::line::shift_from_current(wp.omega_in, at_output, line)?)
}

/// Traced shift profile across a packet: `(exit_time, Δω)` for `n` points
/// spread evenly over the envelope.
pub fn instantaneous_profile(
    line: &LineSpec,
    wp: &WavePacketSpec,
    cp: Option<&ControlPulseSpec>,
    cfg: &OracleConfig,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let s = wp.delay + wp.tau_wp * (k as f64 + 0.5) / n as f64;
            let r = trace_point(s, wp.port, line, cp, cfg)?;
            Ok((r.exit_time, wp.omega_in * (r.omega_ratio - 1.0)))
        })
        .collect()
}

/// Shift (rad/s) of the packet's centre point.
pub fn centre_shift(
    line: &LineSpec,
    wp: &WavePacketSpec,
    cp: Option<&ControlPulseSpec>,
    cfg: &OracleConfig,
) -> Result<f64> {
    let r = trace_point(wp.delay + 0.5 * wp.tau_wp, wp.port, line, cp, cfg)?;
    Ok(wp.omega_in * (r.omega_ratio - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NoMeeting,
    RedOnly,
    Cancel,
    BlueOnly,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::NoMeeting => "no-meeting",
            Condition::RedOnly => "red-only",
            Condition::Cancel => "cancel",
            Condition::BlueOnly => "blue-only",
        }
    }
}

fn rect_times(cp: &ControlPulseSpec) -> Result<(f64, f64)> {
    match &cp.shape {
        ControlShape::Rect {
            duration, rise, fall, ..
        } => Ok((0.5 * rise, duration - 0.5 * fall)),
        _ => Err(Error::validation("encounter classification needs a rectangular pulse")),
    }
}

/// Encounter condition of the packet centre for a packet launched `delay`
/// after the control pulse, with both worldlines at v0.
///
/// The pulse's own delay is ignored; only the relative timing matters.
pub fn classify_condition(
    delay: f64,
    line: &LineSpec,
    wp: &WavePacketSpec,
    cp: &ControlPulseSpec,
) -> Result<Condition> {
    let (t_rise, t_fall) = rect_times(cp)?;
    if cp.port == wp.port {
        return Ok(Condition::NoMeeting);
    }
    let tau_p = line.tau_p();
    let centre = delay + 0.5 * wp.tau_wp;
    let meets = |t_front: f64| centre < t_front + tau_p && t_front < centre + tau_p;
    Ok(match (meets(t_rise), meets(t_fall)) {
        (false, false) => Condition::NoMeeting,
        (true, false) => Condition::RedOnly,
        (true, true) => Condition::Cancel,
        (false, true) => Condition::BlueOnly,
    })
}

/// Delays at which the classification changes, in increasing order, each with
/// the condition holding just above it.
pub fn condition_boundaries(
    line: &LineSpec,
    wp: &WavePacketSpec,
    cp: &ControlPulseSpec,
) -> Result<Vec<(f64, Condition)>> {
    let (t_rise, t_fall) = rect_times(cp)?;
    let tau_p = line.tau_p();
    let half = 0.5 * wp.tau_wp;
    let mut cuts: Vec<f64> = [
        t_rise - tau_p,
        t_rise + tau_p,
        t_fall - tau_p,
        t_fall + tau_p,
    ]
    .iter()
    .map(|c| c - half)
    .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    let mut prev = classify_condition(cuts[0] - 1e-12, line, wp, cp)?;
    for c in cuts {
        // Probe just above the cut; the intervals are open.
        let next = classify_condition(c + 1e-12, line, wp, cp)?;
        if next != prev {
            out.push((c, next));
            prev = next;
        }
    }
    Ok(out)
}

/// Rendered spacetime picture: control current on a (t, x) grid and traced
/// worldlines of packet points.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeDiagram {
    pub t_axis: Vec<f64>,
    /// Position measured from the packet's input port (m).
    pub x_axis: Vec<f64>,
    /// `current[t][x]` (A).
    pub current: Vec<Vec<f64>>,
    pub rays: Vec<Worldline>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Worldline {
    pub label: String,
    /// `(t, x, ω/ω_in)` samples.
    pub points: Vec<(f64, f64, f64)>,
    pub result: RayResult,
}

/// Grid of the prescribed control current plus the worldlines of the packet's
/// leading, centre and trailing points. `resolution` is the number of grid
/// cells along each axis.
pub fn spacetime_diagram(
    line: &LineSpec,
    wp: &WavePacketSpec,
    cp: Option<&ControlPulseSpec>,
    cfg: &OracleConfig,
    resolution: usize,
) -> Result<SpacetimeDiagram> {
    let res = resolution.max(2);
    let field = Field::new(wp.port, line, cp, cfg)?;
    let mut rays = Vec::new();
    let probes = [
        ("leading", wp.delay),
        ("centre", wp.delay + 0.5 * wp.tau_wp),
        ("trailing", wp.delay + wp.tau_wp),
    ];
    let mut t_hi = wp.delay + wp.tau_wp + line.tau_p();
    for (label, entry) in probes {
        let mut raw = Vec::new();
        let result = trace_inner(entry, wp.port, line, cp, cfg, Some(&mut raw))?;
        t_hi = t_hi.max(result.exit_time);
        let stride = (raw.len() / (4 * res)).max(1);
        let v_front = field.signed_front();
        let mut points = vec![(entry, 0.0, 1.0)];
        let i0 = field.current(0.0, entry);
        for (k, &(t, x, i)) in raw.iter().enumerate() {
            if k % stride == 0 || k + 1 == raw.len() {
                // Conserved ω·(1 − v_f/v) gives the running ratio directly.
                let v_a = phase_velocity(i0, line)?;
                let v_b = phase_velocity(i, line)?;
                let ratio = compose_doppler(1.0, &[DopplerArgs::new(v_front, v_a, v_b)])
                    .unwrap_or(f64::NAN);
                points.push((t, x, ratio));
            }
        }
        rays.push(Worldline {
            label: label.to_string(),
            points,
            result,
        });
    }
    let t_lo = wp.delay.min(cp.map_or(wp.delay, |c| c.delay)) - 0.25 * line.tau_p();
    let t_hi = t_hi + 0.25 * line.tau_p();
    let t_axis: Vec<f64> = (0..res)
        .map(|k| t_lo + (t_hi - t_lo) * k as f64 / (res - 1) as f64)
        .collect();
    let x_axis: Vec<f64> = (0..res)
        .map(|k| line.length * k as f64 / (res - 1) as f64)
        .collect();
    let current = t_axis
        .iter()
        .map(|&t| x_axis.iter().map(|&x| field.current(x, t)).collect())
        .collect();
    Ok(SpacetimeDiagram {
        t_axis,
        x_axis,
        current,
        rays,
    })
}

impl SpacetimeDiagram {
    /// Long-format grid: `t_s,x_m,i_cp_a`.
    pub fn grid_csv(&self) -> String {
        let mut s = String::from("t_s,x_m,i_cp_a\n");
        for (row, &t) in self.current.iter().zip(&self.t_axis) {
            for (&i, &x) in row.iter().zip(&self.x_axis) {
                let _ = writeln!(s, "{t:.6e},{x:.6e},{i:.6e}");
            }
        }
        s
    }

    /// Worldlines: `ray,t_s,x_m,omega_ratio`.
    pub fn rays_csv(&self) -> String {
        let mut s = String::from("ray,t_s,x_m,omega_ratio\n");
        for r in &self.rays {
            for &(t, x, w) in &r.points {
                let _ = writeln!(s, "{},{t:.6e},{x:.6e},{w:.12}", r.label);
            }
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let peak = self
            .current
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut plot = crate::svg::Heatmap::new(
            "control current and packet worldlines",
            "x (m)",
            "t (ns)",
        );
        plot.set_grid(
            &self.x_axis,
            &self.t_axis.iter().map(|t| t * 1e9).collect::<Vec<_>>(),
            |r, c| {
                if peak > 0.0 {
                    self.current[r][c] / peak
                } else {
                    0.0
                }
            },
        );
        for ray in &self.rays {
            let pts: Vec<(f64, f64)> = ray.points.iter().map(|&(t, x, _)| (x, t * 1e9)).collect();
            plot.add_line(&pts, &format!("{} ×{:.5}", ray.label, ray.result.omega_ratio));
        }
        plot.render()
    }
}
