//! Leapfrog integration of the nonlinear telegrapher equations.
//!
//! Node voltages live at integer time steps, branch currents at half steps.
//! Both ends are resistive Thevenin sources with `R = Z0`; each end carries a
//! half-cell capacitance so that at the magic step `V_port = V_s − Z0·I_port`.
//!
//! A stimulus current `i(t)` is launched by the source voltage
//! `V_s = Z0·i + ∫₀^i Z(j) dj`, which is exactly the drive that puts a simple
//! wave of current `i` onto the line. On a linear line this is the familiar
//! `2·Z0·i`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::line::simple_wave_voltage;
use crate::types::{ControlPulseSpec, LineModel, LineSpec, Port, WavePacketSpec, Waveform};

/// Default viscosity strength: the diffusion number of the implicit smoothing.
pub const DEFAULT_SHOCK_VISCOSITY: f64 = 0.5;
/// Default viscosity threshold as a fraction of `I*` per cell.
pub const DEFAULT_SHOCK_THRESHOLD: f64 = 0.015;

/// Discrete field on the staggered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// Node voltages, `n_cells + 1` entries, at time `t`.
    pub v_grid: Vec<f64>,
    /// Branch currents, `n_cells` entries, at time `t − dt/2`.
    pub i_grid: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl FieldState {
    pub fn zeros(n_cells: usize) -> Self {
        FieldState {
            v_grid: vec![0.0; n_cells + 1],
            i_grid: vec![0.0; n_cells],
            t: 0.0,
            step: 0,
        }
    }

    /// `Σ (C·V² + L(I)·I²)·dx/2` with the current at the trailing half step.
    pub fn energy(&self, line: &LineSpec) -> f64 {
        let dx = line.dx();
        let ev: f64 = self.v_grid.iter().map(|v| v * v).sum::<f64>() * line.c;
        let ei: f64 = self
            .i_grid
            .iter()
            .map(|&i| crate::line::inductance_factor(i, line) * i * i)
            .sum::<f64>()
            * line.l0;
        0.5 * dx * (ev + ei)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dx: f64,
    pub dt: f64,
    pub duration: f64,
    pub record_ports: bool,
    /// Spacetime decimation in both axes; 0 disables recording.
    pub snapshot_stride: usize,
    /// Per-branch current that enters the inductance law but is not part of
    /// the field: a frozen bias. `None` means unbiased.
    pub frozen_bias: Option<Vec<f64>>,
    /// Strength of the shock-capturing viscosity (0 disables it). The
    /// smoothing is implicit, so any non-negative value is stable.
    pub shock_viscosity: f64,
    /// Per-cell current jump (A) above which the viscosity starts to act; it
    /// reaches full strength at twice this value.
    pub shock_threshold: f64,
    /// Grid-scale filter: order `p` of the `sin^{2p}(k·dx/2)` response,
    /// strength at the Nyquist wavenumber, and application interval in steps.
    /// `None` disables it.
    pub nyquist_filter: Option<NyquistFilter>,
    /// How the wave packet is coupled to the control pulse.
    pub coupling: PacketCoupling,
}

/// Treatment of the wave packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketCoupling {
    /// The packet is a separate field obeying the equations linearised about
    /// the control pulse, stepped in lock-step with it. Exact to first order
    /// in the packet amplitude, and the packet never feels the shock
    /// regularisation or feeds back into it. Port outputs are the sum.
    #[default]
    Perturbative,
    /// Packet and pulse share one nonlinear field.
    Full,
}

/// High-order spatial low-pass applied identically to both fields.
///
/// Removes the grid-scale mode that a magic-step leapfrog can neither
/// propagate nor damp. Its response at wavenumber `k` is
/// `1 − strength·sin^{2p}(k·dx/2)`, i.e. about `1e-14` at 40 cells per
/// wavelength for the default order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NyquistFilter {
    pub order: usize,
    pub strength: f64,
    pub every: usize,
}

impl Default for NyquistFilter {
    fn default() -> Self {
        NyquistFilter {
            order: 6,
            strength: 0.5,
            every: 4,
        }
    }
}

impl SolverConfig {
    /// Magic-step configuration for `line`.
    pub fn for_line(line: &LineSpec, duration: f64) -> Self {
        SolverConfig {
            dx: line.dx(),
            dt: line.magic_dt(),
            duration,
            record_ports: true,
            snapshot_stride: 0,
            frozen_bias: None,
            shock_viscosity: DEFAULT_SHOCK_VISCOSITY,
            shock_threshold: DEFAULT_SHOCK_THRESHOLD * line.i_star,
            nyquist_filter: Some(NyquistFilter::default()),
            coupling: PacketCoupling::default(),
        }
    }

    pub fn with_coupling(mut self, coupling: PacketCoupling) -> Self {
        self.coupling = coupling;
        self
    }

    /// Disables the shock-capturing viscosity: the bare leapfrog scheme.
    pub fn without_viscosity(mut self) -> Self {
        self.shock_viscosity = 0.0;
        self
    }

    /// Disables every numerical regularisation: the bare leapfrog scheme.
    pub fn bare(mut self) -> Self {
        self.shock_viscosity = 0.0;
        self.nyquist_filter = None;
        self
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    /// Uniform frozen bias on the whole line.
    pub fn with_uniform_bias(mut self, line: &LineSpec, bias: f64) -> Self {
        self.frozen_bias = Some(vec![bias; line.n_cells]);
        self
    }

    /// Frozen bias `bias` on the cells right of `x_front`, zero to the left.
    pub fn with_static_front(mut self, line: &LineSpec, x_front: f64, bias: f64) -> Self {
        let dx = line.dx();
        self.frozen_bias = Some(
            (0..line.n_cells)
                .map(|k| if (k as f64 + 0.5) * dx >= x_front { bias } else { 0.0 })
                .collect(),
        );
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt - 1e-9).ceil() as usize
    }

    pub fn validate(&self, line: &LineSpec) -> Result<()> {
        line.validate()?;
        let limit = self.dx * (line.l0 * line.c).sqrt();
        if !(self.dt > 0.0) {
            return Err(Error::validation("dt must be positive"));
        }
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation {
                dt: self.dt,
                limit,
            });
        }
        if ((self.dx - line.dx()) / line.dx()).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "dx = {:.6e} m does not match line length / n_cells = {:.6e} m",
                self.dx,
                line.dx()
            )));
        }
        if self.duration < line.tau_p() * (1.0 - 1e-9) {
            return Err(Error::validation(format!(
                "duration {:.3e} s is shorter than the propagation delay {:.3e} s",
                self.duration,
                line.tau_p()
            )));
        }
        if !(0.0..=10.0).contains(&self.shock_viscosity) || !(self.shock_threshold > 0.0) {
            return Err(Error::validation(
                "shock_viscosity must be in [0, 10] and shock_threshold positive",
            ));
        }
        if let Some(f) = &self.nyquist_filter {
            if f.order == 0 || f.every == 0 || !(f.strength > 0.0 && f.strength < 2.0) {
                return Err(Error::validation(
                    "nyquist filter needs order ≥ 1, every ≥ 1 and strength in (0, 2)",
                ));
            }
        }
        if let Some(b) = &self.frozen_bias {
            if b.len() != line.n_cells {
                return Err(Error::validation("frozen_bias must have one entry per cell"));
            }
            if let Some(x) = b.iter().find(|x| !(x.abs() < line.i_crit)) {
                return Err(Error::CriticalCurrentExceeded {
                    current: x.abs(),
                    i_crit: line.i_crit,
                    at_step: None,
                });
            }
        }
        Ok(())
    }
}

/// Port observables, sampled at every integer step.
#[derive(Debug, Clone, PartialEq)]
pub struct PortRecord {
    /// Outgoing wave at the left termination, `V_port − (V_s − Z0·i_stim)`.
    pub left_out: Waveform,
    pub right_out: Waveform,
    /// Raw port node voltages.
    pub left_v: Waveform,
    pub right_v: Waveform,
    /// Stimulus currents as injected (zero if absent).
    pub wp_in: Waveform,
    pub cp_in: Waveform,
    /// The packet's own outgoing waves `[left, right]`, when it was solved
    /// perturbatively; they are already included in `left_out`/`right_out`.
    pub packet_out: Option<[Waveform; 2]>,
}

impl PortRecord {
    pub fn outgoing(&self, port: Port) -> &Waveform {
        match port {
            Port::Left => &self.left_out,
            Port::Right => &self.right_out,
        }
    }
}

/// Decimated `V(x, t)` and `I(x, t)`.
///
/// Rows are times, columns are node positions. The current at node `k` is
/// taken from branch `min(k, n_cells − 1)` at the preceding half step.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeRecord {
    pub t_axis: Vec<f64>,
    pub x_axis: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub i: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpacetimeFormat {
    /// Long format: `t_s,x_m,v_V,i_A` one row per sample.
    #[default]
    Long,
    /// Dense matrix of currents: first row `x` positions, first column `t`.
    Matrix,
}

impl SpacetimeRecord {
    pub fn to_csv(&self, format: SpacetimeFormat) -> String {
        let mut out = String::new();
        match format {
            SpacetimeFormat::Long => {
                out.push_str("t_s,x_m,v_V,i_A\n");
                for (r, t) in self.t_axis.iter().enumerate() {
                    for (c, x) in self.x_axis.iter().enumerate() {
                        let _ = writeln!(out, "{t:.6e},{x:.6e},{:.6e},{:.6e}", self.v[r][c], self.i[r][c]);
                    }
                }
            }
            SpacetimeFormat::Matrix => {
                out.push_str("# rows: t_s, columns: x_m, body: i_A\nt_s");
                for x in &self.x_axis {
                    let _ = write!(out, ",{x:.6e}");
                }
                out.push('\n');
                for (r, t) in self.t_axis.iter().enumerate() {
                    let _ = write!(out, "{t:.6e}");
                    for v in &self.i[r] {
                        let _ = write!(out, ",{v:.6e}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path, format: SpacetimeFormat) -> Result<()> {
        std::fs::write(path, self.to_csv(format)).map_err(|e| Error::io(path, e))
    }
}

/// Precomputed update coefficients for one line.
pub struct Stepper<'a> {
    line: &'a LineSpec,
    bias: Option<&'a [f64]>,
    /// `dt / (L0·dx)`
    ki: f64,
    /// `dt / (C·dx)`
    kv: f64,
    inv_istar2: f64,
    inv_icrit2: f64,
    /// Boundary node: `a − g`, `1/(a + g)` and `1/R`.
    bnd_minus: f64,
    bnd_inv_plus: f64,
    inv_r: f64,
    dt: f64,
    /// Diffusion number at full strength; zero when the viscosity is off.
    visc: f64,
    inv_threshold: f64,
    scratch: std::cell::RefCell<Vec<f64>>,
    filter: Option<NyquistFilter>,
    filter_buf: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(line: &'a LineSpec, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate(line)?;
        let a = line.c * cfg.dx / (2.0 * cfg.dt);
        let r = line.z0();
        let g = 1.0 / (2.0 * r);
        Ok(Stepper {
            line,
            bias: cfg.frozen_bias.as_deref(),
            ki: cfg.dt / (line.l0 * cfg.dx),
            kv: cfg.dt / (line.c * cfg.dx),
            inv_istar2: 1.0 / (line.i_star * line.i_star),
            inv_icrit2: 1.0 / (line.i_crit * line.i_crit),
            bnd_minus: a - g,
            bnd_inv_plus: 1.0 / (a + g),
            inv_r: 1.0 / r,
            dt: cfg.dt,
            visc: cfg.shock_viscosity,
            inv_threshold: 1.0 / cfg.shock_threshold,
            scratch: std::cell::RefCell::new(vec![0.0; line.n_cells + 1]),
            filter: cfg.nyquist_filter,
            filter_buf: std::cell::RefCell::new((vec![0.0; line.n_cells + 1], vec![0.0; line.n_cells + 1])),
        })
    }

    /// L(I)/L0.
    #[inline]
    fn factor(&self, i: f64) -> f64 {
        match self.line.model {
            LineModel::KineticInductance => {
                let u = i * i * self.inv_istar2;
                1.0 + u + self.line.c4 * u * u
            }
            LineModel::JosephsonChain => {
                1.0 / (1.0 - i * i * self.inv_icrit2).max(f64::MIN_POSITIVE).sqrt()
            }
        }
    }

    /// Flux per unit L0: Φ(I)/L0 = ∫₀^I L(j)/L0 dj.
    #[inline]
    fn phi(&self, i: f64) -> f64 {
        match self.line.model {
            LineModel::KineticInductance => {
                let u = i * i * self.inv_istar2;
                i * (1.0 + u / 3.0 + self.line.c4 * u * u / 5.0)
            }
            LineModel::JosephsonChain => {
                let ic = self.line.i_crit;
                ic * (i / ic).clamp(-1.0, 1.0).asin()
            }
        }
    }

    /// Current whose flux is `target`, by one Newton step from `guess`. The
    /// callers' guesses are first-order accurate, so the residual is squared
    /// away; the viscosity's larger corrections get a second step.
    #[inline]
    fn phi_inv(&self, target: f64, guess: f64) -> f64 {
        match self.line.model {
            LineModel::KineticInductance => guess - (self.phi(guess) - target) / self.factor(guess),
            LineModel::JosephsonChain => {
                let ic = self.line.i_crit;
                ic * (target / ic).sin()
            }
        }
    }

    /// Viscosity coefficient at a node whose adjacent branches differ by `d`:
    /// zero below the threshold, full strength at twice the threshold.
    #[inline]
    fn node_viscosity(&self, d: f64) -> f64 {
        let s = d.abs() * self.inv_threshold - 1.0;
        if s <= 0.0 {
            0.0
        } else {
            self.visc * s.min(1.0)
        }
    }

    /// Backward-Euler diffusion of both fields wherever the node viscosity is
    /// non-zero. Smoothing V and I with the same operator keeps a simple wave
    /// simple, so the damping does not reflect. Fields away from steep jumps
    /// are left bit-for-bit untouched.
    fn apply_viscosity(&self, v: &mut [f64], cur: &mut [f64]) {
        let n = cur.len();
        let mut scratch = self.scratch.borrow_mut();
        let e = &mut scratch[..];
        let (mut lo, mut hi) = (usize::MAX, 0);
        for k in 1..n {
            let c = self.node_viscosity(cur[k] - cur[k - 1]);
            if c > 0.0 {
                e[k] = c;
                lo = lo.min(k);
                hi = k;
            }
        }
        if lo == usize::MAX {
            return;
        }
        // Currents: branches k−1 and k are linked through node k. The flux is
        // the conserved quantity, so it is what gets diffused.
        let mut flux: Vec<f64> = (lo - 1..=hi)
            .map(|k| self.phi(cur[k] + self.bias.map_or(0.0, |b| b[k])))
            .collect();
        implicit_smooth(&mut flux, &e[lo..=hi]);
        for (j, k) in (lo - 1..=hi).enumerate() {
            let b = self.bias.map_or(0.0, |b| b[k]);
            let once = self.phi_inv(flux[j], cur[k] + b);
            cur[k] = self.phi_inv(flux[j], once) - b;
        }
        // Voltages: nodes k and k+1 are linked through branch k; the port
        // nodes keep their own boundary update.
        let vlo = lo.saturating_sub(1).max(1);
        let vhi = (hi + 1).min(n - 1);
        if vhi > vlo {
            let links: Vec<f64> = (vlo..vhi).map(|k| e[k].max(e[k + 1])).collect();
            implicit_smooth(&mut v[vlo..=vhi], &links);
        }
        e[lo..=hi].iter_mut().for_each(|x| *x = 0.0);
    }

    /// Advances `state` by one step. `vs_left`/`vs_right` are the source
    /// voltages at the intermediate half step.
    pub fn step(&self, state: &mut FieldState, vs_left: f64, vs_right: f64) -> Result<()> {
        let n = state.i_grid.len();
        let v = &mut state.v_grid;
        let cur = &mut state.i_grid;
        let mut max_abs = 0.0f64;
        let mut finite = true;
        for k in 0..n {
            let i = cur[k];
            let b = self.bias.map_or(0.0, |b| b[k]);
            let ib = i + b;
            // Flux form: Φ(I_new) = Φ(I_old) − dt/dx·ΔV keeps shock speeds
            // independent of the regularisation.
            let dphi = self.ki * (v[k + 1] - v[k]);
            if dphi == 0.0 {
                max_abs = max_abs.max(ib.abs());
                continue;
            }
            let guess = ib - dphi / self.factor(ib);
            let next = self.phi_inv(self.phi(ib) - dphi, guess) - b;
            finite &= next.is_finite();
            max_abs = max_abs.max((next + b).abs());
            cur[k] = next;
        }
        if !finite {
            return Err(Error::NonFiniteField { step: state.step });
        }
        if self.visc > 0.0 {
            self.apply_viscosity(v, cur);
            // Diffusion obeys a maximum principle, so only recheck when needed.
            if max_abs >= self.line.i_crit {
                max_abs = match self.bias {
                    Some(b) => cur.iter().zip(b).fold(0.0f64, |m, (i, b)| m.max((i + b).abs())),
                    None => cur.iter().fold(0.0f64, |m, i| m.max(i.abs())),
                };
            }
        }
        if max_abs >= self.line.i_crit {
            return Err(Error::CriticalCurrentExceeded {
                current: max_abs,
                i_crit: self.line.i_crit,
                at_step: Some(state.step),
            });
        }
        for k in 1..n {
            v[k] -= self.kv * (cur[k] - cur[k - 1]);
        }
        v[0] = (v[0] * self.bnd_minus + vs_left * self.inv_r - cur[0]) * self.bnd_inv_plus;
        v[n] = (v[n] * self.bnd_minus + vs_right * self.inv_r + cur[n - 1]) * self.bnd_inv_plus;
        if !(v[0].is_finite() && v[n].is_finite()) {
            return Err(Error::NonFiniteField { step: state.step });
        }
        state.step += 1;
        state.t = state.step as f64 * self.dt;
        if let Some(f) = self.filter {
            if state.step % f.every == 0 {
                let mut bufs = self.filter_buf.borrow_mut();
                let (a, b) = &mut *bufs;
                nyquist_filter(&mut state.v_grid, f, a, b);
                nyquist_filter(&mut state.i_grid, f, a, b);
            }
        }
        Ok(())
    }
}

impl Stepper<'_> {
    /// Advances a small-signal field riding on a background current that
    /// went from `bg_old` to `bg_new` over this step:
    /// `L(I_new)·i_new = L(I_old)·i_old − dt/dx·ΔV`.
    pub fn step_linear(
        &self,
        state: &mut FieldState,
        bg_old: &[f64],
        bg_new: &[f64],
        vs_left: f64,
        vs_right: f64,
    ) -> Result<()> {
        let n = state.i_grid.len();
        let v = &mut state.v_grid;
        let cur = &mut state.i_grid;
        let mut finite = true;
        for k in 0..n {
            let b = self.bias.map_or(0.0, |b| b[k]);
            let flux = self.factor(bg_old[k] + b) * cur[k] - self.ki * (v[k + 1] - v[k]);
            cur[k] = flux / self.factor(bg_new[k] + b);
            finite &= cur[k].is_finite();
        }
        if !finite {
            return Err(Error::NonFiniteField { step: state.step });
        }
        for k in 1..n {
            v[k] -= self.kv * (cur[k] - cur[k - 1]);
        }
        v[0] = (v[0] * self.bnd_minus + vs_left * self.inv_r - cur[0]) * self.bnd_inv_plus;
        v[n] = (v[n] * self.bnd_minus + vs_right * self.inv_r + cur[n - 1]) * self.bnd_inv_plus;
        state.step += 1;
        state.t = state.step as f64 * self.dt;
        if let Some(f) = self.filter {
            if state.step % f.every == 0 {
                let mut bufs = self.filter_buf.borrow_mut();
                let (a, b) = &mut *bufs;
                nyquist_filter(&mut state.v_grid, f, a, b);
                nyquist_filter(&mut state.i_grid, f, a, b);
            }
        }
        Ok(())
    }
}

/// `x ← x − ε·(−δ²/4)^p x` on the points where the full stencil fits; the
/// outermost `p` points on each side are left alone.
fn nyquist_filter(x: &mut [f64], f: NyquistFilter, a: &mut Vec<f64>, b: &mut Vec<f64>) {
    let n = x.len();
    let p = f.order;
    if n <= 2 * p + 1 {
        return;
    }
    a.clear();
    a.extend_from_slice(x);
    b.resize(n, 0.0);
    for pass in 1..=p {
        for k in pass..n - pass {
            b[k] = -0.25 * (a[k + 1] - 2.0 * a[k] + a[k - 1]);
        }
        std::mem::swap(a, b);
    }
    for k in p..n - p {
        x[k] -= f.strength * a[k];
    }
}

/// Solves `(1 − Δ_e) x_new = x` in place, where `links[j]` couples `x[j]` and
/// `x[j+1]`. Runs of zero links decouple, so each non-zero run is its own
/// tridiagonal block.
fn implicit_smooth(x: &mut [f64], links: &[f64]) {
    debug_assert_eq!(links.len() + 1, x.len());
    let mut j = 0;
    while j < links.len() {
        if links[j] == 0.0 {
            j += 1;
            continue;
        }
        let start = j;
        while j < links.len() && links[j] != 0.0 {
            j += 1;
        }
        // Block covers x[start ..= j] with links[start .. j].
        let block = &mut x[start..=j];
        let l = &links[start..j];
        let m = block.len();
        let link = |i: isize| -> f64 {
            if i < 0 || i as usize >= l.len() {
                0.0
            } else {
                l[i as usize]
            }
        };
        let mut c_prime = vec![0.0; m];
        let mut d_prime = vec![0.0; m];
        for i in 0..m {
            let a = -link(i as isize - 1);
            let c = -link(i as isize);
            let b = 1.0 - a - c;
            let (cp, dp) = if i == 0 { (0.0, 0.0) } else { (c_prime[i - 1], d_prime[i - 1]) };
            let denom = b - a * cp;
            c_prime[i] = c / denom;
            d_prime[i] = (block[i] - a * dp) / denom;
        }
        block[m - 1] = d_prime[m - 1];
        for i in (0..m - 1).rev() {
            block[i] = d_prime[i] - c_prime[i] * block[i + 1];
        }
    }
}

/// One step of the scheme; convenience wrapper around [`Stepper`].
pub fn step(
    mut state: FieldState,
    line: &LineSpec,
    cfg: &SolverConfig,
    vs_left: f64,
    vs_right: f64,
) -> Result<FieldState> {
    Stepper::new(line, cfg)?.step(&mut state, vs_left, vs_right)?;
    Ok(state)
}

/// Source voltage that launches a simple wave of current `i`.
pub fn source_voltage(i: f64, line: &LineSpec) -> f64 {
    if i == 0.0 {
        return 0.0;
    }
    line.z0() * i + simple_wave_voltage(i, line)
}

/// Runs the solver from a quiescent line.
///
/// `wp` is optional so that control-pulse-only runs need no dummy packet.
pub fn run(
    line: &LineSpec,
    wp: Option<&WavePacketSpec>,
    cp: Option<&ControlPulseSpec>,
    cfg: &SolverConfig,
) -> Result<(PortRecord, Option<SpacetimeRecord>)> {
    let stepper = Stepper::new(line, cfg)?;
    if let Some(wp) = wp {
        wp.validate(line)?;
    }
    if let Some(cp) = cp {
        cp.validate(line)?;
    }
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let z0 = line.z0();

    // Stimulus currents at integer steps, per port, split into the part
    // carried by the main field and the perturbative packet.
    let perturbative = cfg.coupling == PacketCoupling::Perturbative && wp.is_some();
    let mut wp_in = vec![0.0; n_steps + 1];
    let mut cp_in = vec![0.0; n_steps + 1];
    let mut stim = [vec![0.0; n_steps + 1], vec![0.0; n_steps + 1]];
    let mut pk_stim = [vec![0.0; n_steps + 1], vec![0.0; n_steps + 1]];
    let port_idx = |p: Port| match p {
        Port::Left => 0,
        Port::Right => 1,
    };
    for n in 0..=n_steps {
        let t = n as f64 * dt;
        if let Some(cp) = cp {
            let i = cp.current_at(t);
            cp_in[n] = i;
            stim[port_idx(cp.port)][n] += i;
        }
        if let Some(wp) = wp {
            let i = wp.current_at(t);
            wp_in[n] = i;
            let target = if perturbative { &mut pk_stim } else { &mut stim };
            target[port_idx(wp.port)][n] += i;
        }
    }
    let vs: Vec<Vec<f64>> = stim
        .iter()
        .map(|s| s.iter().map(|&i| source_voltage(i, line)).collect())
        .collect();
    // Packet drive: the first-order change of the source voltage on top of
    // whatever the main field's source already supplies at that port.
    let pk_vs: Vec<Vec<f64>> = (0..2)
        .map(|p| {
            (0..=n_steps)
                .map(|n| {
                    let (base, extra) = (stim[p][n], pk_stim[p][n]);
                    if extra == 0.0 {
                        0.0
                    } else {
                        source_voltage(base + extra, line) - vs[p][n]
                    }
                })
                .collect()
        })
        .collect();

    let mut state = FieldState::zeros(line.n_cells);
    let mut packet = perturbative.then(|| FieldState::zeros(line.n_cells));
    let mut bg_old = vec![0.0; line.n_cells];
    let nodes = line.n_cells;
    let mut left_v = Vec::with_capacity(n_steps + 1);
    let mut right_v = Vec::with_capacity(n_steps + 1);
    let mut left_out = Vec::with_capacity(n_steps + 1);
    let mut right_out = Vec::with_capacity(n_steps + 1);
    let mut pk_out = [Vec::new(), Vec::new()];

    let stride = cfg.snapshot_stride;
    let mut spacetime = (stride > 0).then(|| SpacetimeRecord {
        t_axis: Vec::new(),
        x_axis: (0..=nodes).step_by(stride).map(|k| k as f64 * cfg.dx).collect(),
        v: Vec::new(),
        i: Vec::new(),
    });

    for n in 0..=n_steps {
        let mut vl = state.v_grid[0];
        let mut vr = state.v_grid[nodes];
        let mut ol = vl - (vs[0][n] - z0 * stim[0][n]);
        let mut or = vr - (vs[1][n] - z0 * stim[1][n]);
        if let Some(pk) = &packet {
            let pl = pk.v_grid[0] - (pk_vs[0][n] - z0 * pk_stim[0][n]);
            let pr = pk.v_grid[nodes] - (pk_vs[1][n] - z0 * pk_stim[1][n]);
            pk_out[0].push(pl);
            pk_out[1].push(pr);
            vl += pk.v_grid[0];
            vr += pk.v_grid[nodes];
            ol += pl;
            or += pr;
        }
        left_v.push(vl);
        right_v.push(vr);
        left_out.push(ol);
        right_out.push(or);
        if let Some(st) = spacetime.as_mut() {
            if n % stride == 0 {
                let pk = packet.as_ref();
                let vk = |k: usize| state.v_grid[k] + pk.map_or(0.0, |p| p.v_grid[k]);
                let ik = |k: usize| state.i_grid[k] + pk.map_or(0.0, |p| p.i_grid[k]);
                st.t_axis.push(state.t);
                st.v.push((0..=nodes).step_by(stride).map(vk).collect());
                st.i.push((0..=nodes).step_by(stride).map(|k| ik(k.min(nodes - 1))).collect());
            }
        }
        if n == n_steps {
            break;
        }
        let half = |s: &Vec<f64>| 0.5 * (s[n] + s[n + 1]);
        if packet.is_some() {
            bg_old.copy_from_slice(&state.i_grid);
        }
        stepper.step(&mut state, half(&vs[0]), half(&vs[1]))?;
        if let Some(pk) = packet.as_mut() {
            stepper.step_linear(pk, &bg_old, &state.i_grid, half(&pk_vs[0]), half(&pk_vs[1]))?;
        }
    }

    let fs = 1.0 / dt;
    let wf = |s: Vec<f64>| Waveform {
        sample_rate: fs,
        t0: 0.0,
        samples: s,
    };
    let [pl, pr] = pk_out;
    let record = PortRecord {
        left_out: wf(left_out),
        right_out: wf(right_out),
        left_v: wf(left_v),
        right_v: wf(right_v),
        wp_in: wf(wp_in),
        cp_in: wf(cp_in),
        packet_out: packet.is_some().then(|| [wf(pl), wf(pr)]),
    };
    Ok((record, spacetime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ControlPulseSpec, EnvelopeSpec, WavePacketSpec};

    fn small_line() -> LineSpec {
        LineSpec::default().with_n_cells(800)
    }

    #[test]
    fn zero_stays_zero() {
        let line = small_line();
        let cfg = SolverConfig::for_line(&line, 50e-9);
        let s = step(FieldState::zeros(line.n_cells), &line, &cfg, 0.0, 0.0).unwrap();
        assert!(s.v_grid.iter().chain(&s.i_grid).all(|&x| x == 0.0));
        assert_eq!(s.step, 1);
    }

    #[test]
    fn impulse_splits_in_two() {
        let line = small_line();
        let cfg = SolverConfig::for_line(&line, 50e-9).bare();
        let stepper = Stepper::new(&line, &cfg).unwrap();
        let mut s = FieldState::zeros(line.n_cells);
        // Single-node impulse, with the half-step currents of its right- and
        // left-going halves (a bare voltage spike is the grid's Nyquist mode).
        let z0 = line.z0();
        s.v_grid[400] = 1e-4;
        s.i_grid[399] = 0.5e-4 / z0;
        s.i_grid[400] = -0.5e-4 / z0;
        for _ in 0..100 {
            stepper.step(&mut s, 0.0, 0.0).unwrap();
        }
        let left: f64 = s.v_grid[295..=305].iter().sum();
        let right: f64 = s.v_grid[495..=505].iter().sum();
        assert!((left - 0.5e-4).abs() < 1e-5 * 0.5e-4, "left {left}");
        assert!((right - 0.5e-4).abs() < 1e-5 * 0.5e-4, "right {right}");
    }

    #[test]
    fn travelling_wave_energy_conserved() {
        let line = LineSpec::default();
        let cfg = SolverConfig::for_line(&line, 50e-9);
        let stepper = Stepper::new(&line, &cfg).unwrap();
        let mut s = FieldState::zeros(line.n_cells);
        let z0 = line.z0();
        for k in 0..=line.n_cells {
            let x = k as f64 - 2000.0;
            s.v_grid[k] = 1e-4 * (-(x / 80.0).powi(2)).exp();
        }
        // Right-moving wave: the current half a step earlier sits one node to the right.
        for k in 0..line.n_cells {
            s.i_grid[k] = s.v_grid[k + 1] / z0;
        }
        let e0 = s.energy(&line);
        for _ in 0..1000 {
            stepper.step(&mut s, 0.0, 0.0).unwrap();
        }
        let e1 = s.energy(&line);
        assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
    }

    #[test]
    fn cfl_and_duration_checked() {
        let line = small_line();
        let mut cfg = SolverConfig::for_line(&line, 50e-9);
        cfg.dt *= 1.01;
        assert!(matches!(cfg.validate(&line), Err(Error::CflViolation { .. })));
        let short = SolverConfig::for_line(&line, 10e-9);
        assert!(short.validate(&line).is_err());
    }

    #[test]
    fn packet_delay_is_exact() {
        let line = small_line();
        // Tiny amplitude: the line's own Kerr term would otherwise dephase the
        // carrier by ~1e-4 over one transit, which is physics, not scheme error.
        let wp = WavePacketSpec::rectangular(1e9, 10e-9)
            .with_delay(1e-9)
            .with_amplitude(1e-8);
        let cfg = SolverConfig::for_line(&line, 60e-9).bare();
        let (rec, _) = run(&line, Some(&wp), None, &cfg).unwrap();
        let z0 = line.z0();
        let lag = line.n_cells;
        let peak = wp.amplitude * z0;
        let mut worst = 0.0f64;
        for n in lag..rec.right_out.len() {
            let expect = z0 * rec.wp_in.samples[n - lag];
            worst = worst.max((rec.right_out.samples[n] - expect).abs());
        }
        assert!(worst < 1e-6 * peak, "worst {worst:e} vs peak {peak:e}");
        // Nothing comes back out of the input port.
        assert!(rec.left_out.peak_abs() < 1e-6 * peak);
    }

    #[test]
    fn filtered_solver_keeps_smooth_packets() {
        let line = small_line();
        let wp = WavePacketSpec::rectangular(1e9, 10e-9)
            .with_delay(1e-9)
            .with_amplitude(1e-8)
            .with_envelope(EnvelopeSpec::Gaussian { sigma: 1e-9 });
        let cfg = SolverConfig::for_line(&line, 60e-9);
        let (rec, _) = run(&line, Some(&wp), None, &cfg).unwrap();
        let z0 = line.z0();
        let lag = line.n_cells;
        let peak = wp.amplitude * z0;
        let mut worst = 0.0f64;
        for n in lag..rec.right_out.len() {
            let expect = z0 * rec.wp_in.samples[n - lag];
            worst = worst.max((rec.right_out.samples[n] - expect).abs());
        }
        assert!(worst < 1e-4 * peak, "worst {worst:e} vs peak {peak:e}");
    }

    #[test]
    fn critical_current_aborts() {
        let mut line = small_line();
        line.i_crit = 1e-3;
        // The pulse itself is checked against I_c before any stepping.
        let cp = ControlPulseSpec::rect(1.2e-3, 20e-9);
        let cfg = SolverConfig::for_line(&line, 60e-9);
        assert!(matches!(
            run(&line, None, Some(&cp), &cfg),
            Err(Error::CriticalCurrentExceeded { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let line = small_line();
        let wp = WavePacketSpec::rectangular(2e9, 10e-9);
        let cp = ControlPulseSpec::rect(1.5e-3, 20e-9);
        let cfg = SolverConfig::for_line(&line, 60e-9).with_snapshot_stride(50);
        let a = run(&line, Some(&wp), Some(&cp), &cfg).unwrap();
        let b = run(&line, Some(&wp), Some(&cp), &cfg).unwrap();
        assert_eq!(a, b);
        let st = a.1.unwrap();
        assert_eq!(st.x_axis.len(), 17);
        assert!(st.to_csv(SpacetimeFormat::Matrix).lines().count() > 10);
    }

    #[test]
    fn perturbative_packet_matches_full_solve() {
        // Smooth counter-propagating pulse, no shocks: both couplings solve
        // the same physics up to second order in the packet amplitude.
        let line = small_line();
        let wp = WavePacketSpec::rectangular(2e9, 10e-9).with_amplitude(1e-6);
        let cp = ControlPulseSpec::rect(0.6e-3, 20e-9)
            .with_port(Port::Right)
            .with_edges(3e-9, 3e-9, crate::types::EdgeShape::Smoothstep);
        let cfg = SolverConfig::for_line(&line, 60e-9).without_viscosity();
        let (full, _) = run(&line, Some(&wp), Some(&cp), &cfg.clone().with_coupling(PacketCoupling::Full)).unwrap();
        let (pert, _) = run(&line, Some(&wp), Some(&cp), &cfg).unwrap();
        assert!(full.packet_out.is_none());
        let [_, pk] = pert.packet_out.as_ref().unwrap();
        let peak = pk.peak_abs();
        assert!(peak > 1e-5);
        let worst = full
            .right_out
            .samples
            .iter()
            .zip(&pert.right_out.samples)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 1e-3 * peak, "worst {worst:e} vs packet peak {peak:e}");
    }
}
