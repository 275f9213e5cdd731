//! Closed-form physics of the current-tunable line.
//!
//! The inductance law, phase velocity, impedance, the moving-interface Doppler
//! ratio and the amplitude-to-shift law. Everything here is a pure function of
//! its inputs.

use crate::error::{Error, Result};
use crate::types::{LineModel, LineSpec};

fn check_current(i: f64, spec: &LineSpec) -> Result<()> {
    if !i.is_finite() || i.abs() >= spec.i_crit {
        return Err(Error::CriticalCurrentExceeded {
            current: i.abs(),
            i_crit: spec.i_crit,
            at_step: None,
        });
    }
    Ok(())
}

/// L(I)/L0 without the critical-current check. Used by the solver's inner loop.
#[inline]
pub(crate) fn inductance_factor(i: f64, spec: &LineSpec) -> f64 {
    match spec.model {
        LineModel::KineticInductance => {
            let u = (i / spec.i_star).powi(2);
            1.0 + u + spec.c4 * u * u
        }
        LineModel::JosephsonChain => {
            let r = i / spec.i_crit;
            1.0 / (1.0 - r * r).sqrt()
        }
    }
}

/// Current-dependent inductance per unit length (H/m).
pub fn kinetic_inductance(i: f64, spec: &LineSpec) -> Result<f64> {
    check_current(i, spec)?;
    Ok(spec.l0 * inductance_factor(i, spec))
}

/// Exact small-signal phase velocity `1/sqrt(L(I)·C)`.
pub fn phase_velocity(i: f64, spec: &LineSpec) -> Result<f64> {
    check_current(i, spec)?;
    Ok(spec.v0() / inductance_factor(i, spec).sqrt())
}

/// Second-order expansion `v0·(1 − I²/(2I*²))`, kept for comparison with the exact law.
pub fn phase_velocity_approx(i: f64, spec: &LineSpec) -> Result<f64> {
    check_current(i, spec)?;
    Ok(spec.v0() * (1.0 - i * i / (2.0 * spec.i_star * spec.i_star)))
}

pub fn characteristic_impedance(i: f64, spec: &LineSpec) -> Result<f64> {
    check_current(i, spec)?;
    Ok(spec.z0() * inductance_factor(i, spec).sqrt())
}

/// Voltage carried by a simple wave whose current rises from 0 to `i`: ∫₀ⁱ Z(i') di'.
///
/// Used to drive a port so that the injected current equals the requested one
/// even where the line is already nonlinear. Odd in `i`.
pub fn simple_wave_voltage(i: f64, spec: &LineSpec) -> f64 {
    if i == 0.0 {
        return 0.0;
    }
    // 16-point Gauss-Legendre on [0, i]; the integrand is smooth and slowly varying.
    const NODES: [(f64, f64); 8] = [
        (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
        (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
        (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
        (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
        (0.755_404_408_355_003_0, 0.124_628_971_255_533_9),
        (0.865_631_202_387_831_7, 0.095_158_511_682_492_79),
        (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
        (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
    ];
    let half = 0.5 * i;
    let z0 = spec.z0();
    let mut acc = 0.0;
    for &(x, w) in &NODES {
        for s in [-1.0, 1.0] {
            let ii = half * (1.0 + s * x);
            acc += w * inductance_factor(ii, spec).sqrt();
        }
    }
    z0 * half * acc
}

/// Velocities across a moving interface.
///
/// `v` is the interface velocity, signed positive along the incident wave's
/// direction; `v1`/`v2` are the phase velocities of the incidence and
/// transmission media.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerArgs {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
}

impl DopplerArgs {
    pub fn new(v: f64, v1: f64, v2: f64) -> Self {
        DopplerArgs { v, v1, v2 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.v1 > 0.0 && self.v2 > 0.0) || !self.v.is_finite() {
            return Err(Error::validation(format!(
                "doppler velocities must be positive and finite: {self:?}"
            )));
        }
        if self.v == self.v2 {
            return Err(Error::SingularInterface { v: self.v });
        }
        Ok(())
    }

    fn numerator(&self) -> f64 {
        1.0 - self.v / self.v1
    }

    fn denominator(&self) -> f64 {
        1.0 - self.v / self.v2
    }
}

/// ω₂/ω₁ = (1 − v/v₁)/(1 − v/v₂) for transmission through a moving interface.
pub fn doppler_ratio(args: DopplerArgs) -> Result<f64> {
    args.validate()?;
    Ok(args.numerator() / args.denominator())
}

/// Applies successive interface crossings to `omega_in`.
///
/// Numerators and denominators are accumulated separately so that a crossing
/// followed by its mirror image returns `omega_in` bit-for-bit.
pub fn compose_doppler(omega_in: f64, crossings: &[DopplerArgs]) -> Result<f64> {
    let mut num = 1.0;
    let mut den = 1.0;
    for c in crossings {
        c.validate()?;
        num *= c.numerator();
        den *= c.denominator();
    }
    Ok(omega_in * (num / den))
}

/// Leading-order shift for a packet crossing a counter-propagating rising front
/// of height `i_cp` that moves at the zero-current velocity:
/// Δω = −(ω/4)·(L(I)/L0 − 1) = −(ω/4)·[(I/I*)² + c4·(I/I*)⁴].
///
/// A falling front gives the negated value.
pub fn shift_from_current(omega_in: f64, i_cp: f64, spec: &LineSpec) -> Result<f64> {
    check_current(i_cp, spec)?;
    if spec.model != LineModel::KineticInductance {
        return Err(Error::validation(
            "shift_from_current applies to the kinetic-inductance model",
        ));
    }
    let u = (i_cp / spec.i_star).powi(2);
    Ok(-0.25 * omega_in * (u + spec.c4 * u * u))
}

/// Control amplitude whose leading-order shift has magnitude `|d_omega|`:
/// the inverse of [`shift_from_current`].
pub fn current_for_shift(omega_in: f64, d_omega: f64, spec: &LineSpec) -> Result<f64> {
    if spec.model != LineModel::KineticInductance {
        return Err(Error::validation(
            "current_for_shift applies to the kinetic-inductance model",
        ));
    }
    if !(omega_in > 0.0 && d_omega.is_finite()) {
        return Err(Error::validation("omega_in must be positive and d_omega finite"));
    }
    // u + c4·u² = 4|Δω|/ω, positive root.
    let rhs = 4.0 * d_omega.abs() / omega_in;
    let u = if spec.c4 == 0.0 {
        rhs
    } else {
        (-1.0 + (1.0 + 4.0 * spec.c4 * rhs).sqrt()) / (2.0 * spec.c4)
    };
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::validation("no real amplitude produces this shift"));
    }
    let i = spec.i_star * u.sqrt();
    check_current(i, spec)?;
    Ok(i)
}

/// Doppler crossing for a front moving against the packet at speed `v_front` (> 0),
/// from a region at current `i_from` into one at `i_to`.
pub fn counter_front_crossing(
    v_front: f64,
    i_from: f64,
    i_to: f64,
    spec: &LineSpec,
) -> Result<DopplerArgs> {
    Ok(DopplerArgs::new(
        -v_front,
        phase_velocity(i_from, spec)?,
        phase_velocity(i_to, spec)?,
    ))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::types::line_from_delay;

    fn device() -> LineSpec {
        LineSpec::default()
    }

    #[test]
    fn shift_inversion_round_trips() {
        let w = 2.0 * PI * 500e6;
        for line in [device(), device().with_c4(0.3)] {
            let i = current_for_shift(w, 2.0 * PI * 14e6, &line).unwrap();
            assert_relative_eq!(shift_from_current(w, i, &line).unwrap(), -2.0 * PI * 14e6, max_relative = 1e-12);
        }
        assert_relative_eq!(current_for_shift(w, 2.0 * PI * 14e6, &device()).unwrap(), 2.058184e-3, max_relative = 1e-6);
        assert!(current_for_shift(w, 2.0 * PI * 60e6, &device()).is_err());
    }

    #[test]
    fn inductance_examples() {
        let s = device();
        assert_eq!(kinetic_inductance(0.0, &s).unwrap(), s.l0);
        let unit = line_from_delay(1.0, 1.0, 1.0, 1.0, 0.99).unwrap();
        // i = i_star is above i_crit on a physical line; check the law itself.
        assert_eq!(inductance_factor(1.0, &unit), 2.0);
        // 8.3333e-6 · (1 + (1.62/6.15)²) = 8.911e-6
        let l = kinetic_inductance(1.62e-3, &s).unwrap();
        assert_relative_eq!(l, 8.911e-6, max_relative = 2e-4);
    }

    #[test]
    fn critical_current_guard() {
        let s = device();
        for i in [2.5e-3, -2.5e-3, 3.0e-3, f64::NAN] {
            assert!(matches!(
                kinetic_inductance(i, &s),
                Err(Error::CriticalCurrentExceeded { .. })
            ));
            assert!(phase_velocity(i, &s).is_err());
            assert!(characteristic_impedance(i, &s).is_err());
        }
    }

    #[test]
    fn velocity_examples() {
        let s = device();
        assert_relative_eq!(phase_velocity(0.0, &s).unwrap(), 1.0 / (s.l0 * s.c).sqrt());
        let i = 0.1 * s.i_star;
        let exact = phase_velocity(i, &s).unwrap();
        let approx = phase_velocity_approx(i, &s).unwrap();
        assert!(((exact - approx) / exact).abs() < 1e-4);

        let jj = LineSpec {
            model: LineModel::JosephsonChain,
            ..device()
        };
        let v = phase_velocity(jj.i_crit * (1.0 - 1e-9), &jj).unwrap();
        assert!(v > 0.0 && v < 0.01 * jj.v0());
    }

    #[test]
    fn impedance_examples() {
        let s = device();
        assert_relative_eq!(characteristic_impedance(0.0, &s).unwrap(), 50.0, max_relative = 1e-14);
        // 50·sqrt(1.0694)
        assert_relative_eq!(
            characteristic_impedance(1.62e-3, &s).unwrap(),
            51.7056,
            max_relative = 1e-5
        );
        let unit = line_from_delay(1.0, 1.0, 1.0, 1.0, 0.99).unwrap();
        assert_relative_eq!(inductance_factor(1.0, &unit).sqrt(), 2f64.sqrt());
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_ratio(DopplerArgs::new(0.0, 1.0, 0.7)).unwrap(), 1.0);
        assert_eq!(doppler_ratio(DopplerArgs::new(-3.0, 0.8, 0.8)).unwrap(), 1.0);
        // (1 + 1)/(1 + 1/0.9)
        assert_relative_eq!(
            doppler_ratio(DopplerArgs::new(-1.0, 1.0, 0.9)).unwrap(),
            0.947_368_421_052_631_5,
            max_relative = 1e-14
        );
        assert!(matches!(
            doppler_ratio(DopplerArgs::new(0.5, 1.0, 0.5)),
            Err(Error::SingularInterface { .. })
        ));
    }

    #[test]
    fn shift_examples() {
        let s = device();
        let w = 2.0 * PI * 4e9;
        assert_eq!(shift_from_current(w, 0.0, &s).unwrap(), 0.0);
        // −(4 GHz/4)·(1.62/6.15)² = −69.39 MHz
        let df = shift_from_current(w, 1.62e-3, &s).unwrap() / (2.0 * PI);
        assert_relative_eq!(df, -69.39e6, max_relative = 1e-3);
        let df = shift_from_current(w, 2.03e-3, &s).unwrap() / (2.0 * PI);
        assert_relative_eq!(df, -108.95e6, max_relative = 1e-3);
    }

    #[test]
    fn compose_examples() {
        let s = device();
        let w = 2.0 * PI * 4e9;
        assert_eq!(compose_doppler(w, &[]).unwrap(), w);
        let v0 = s.v0();
        let v2 = phase_velocity(1.58e-3, &s).unwrap();
        let there_and_back = [DopplerArgs::new(-v0, v0, v2), DopplerArgs::new(-v0, v2, v0)];
        assert_eq!(compose_doppler(w, &there_and_back).unwrap(), w);
    }

    #[test]
    fn simple_wave_voltage_matches_linear_limit() {
        let s = device();
        let i = 1e-7;
        assert_relative_eq!(simple_wave_voltage(i, &s), s.z0() * i, max_relative = 1e-9);
        assert_eq!(simple_wave_voltage(-2e-3, &s), -simple_wave_voltage(2e-3, &s));
        // c4 = 0: closed form (Z0/2)[I·sqrt(1+u²) + I*·asinh(u)], u = I/I*
        let i = 2e-3;
        let u: f64 = i / s.i_star;
        let closed = 0.5 * s.z0() * (i * (1.0 + u * u).sqrt() + s.i_star * u.asinh());
        assert_relative_eq!(simple_wave_voltage(i, &s), closed, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn doppler_reciprocity(v in -5.0f64..5.0, a in 0.1f64..3.0, b in 0.1f64..3.0) {
            prop_assume!((v - a).abs() > 1e-3 && (v - b).abs() > 1e-3);
            let r = doppler_ratio(DopplerArgs::new(v, a, b)).unwrap()
                * doppler_ratio(DopplerArgs::new(v, b, a)).unwrap();
            prop_assert!((r - 1.0).abs() < 1e-12);
        }

        #[test]
        fn eq1_with_exact_velocity_reduces_to_quadratic_law(frac in 0.005f64..0.1, f in 0.5e9f64..8e9) {
            let s = device();
            let i = frac * s.i_star;
            let w = 2.0 * PI * f;
            let crossing = counter_front_crossing(s.v0(), 0.0, i, &s).unwrap();
            let composed = compose_doppler(w, &[crossing]).unwrap();
            let shift = shift_from_current(w, i, &s).unwrap();
            prop_assert!(((composed - (w + shift)) / shift).abs() < 0.01);
        }

        #[test]
        fn velocity_strictly_decreasing(a in 0.0f64..0.999, b in 0.0f64..0.999) {
            prop_assume!((a - b).abs() > 1e-6);
            for model in [LineModel::KineticInductance, LineModel::JosephsonChain] {
                let s = LineSpec { model, ..device() };
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let va = phase_velocity(lo * s.i_crit, &s).unwrap();
                let vb = phase_velocity(-hi * s.i_crit, &s).unwrap();
                prop_assert!(vb < va);
            }
        }

        #[test]
        fn shift_even_in_current_and_linear_in_omega(i in 0.0f64..2.4e-3, w in 1e9f64..5e10, k in 0.1f64..10.0) {
            let s = device();
            let a = shift_from_current(w, i, &s).unwrap();
            prop_assert_eq!(a, shift_from_current(w, -i, &s).unwrap());
            let b = shift_from_current(k * w, i, &s).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-12 * b.abs().max(1e-300));
        }

        #[test]
        fn inductance_monotone(a in 0.0f64..2.49e-3, b in 0.0f64..2.49e-3) {
            let s = device().with_c4(0.3);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(kinetic_inductance(lo, &s).unwrap() <= kinetic_inductance(hi, &s).unwrap());
            prop_assert!(kinetic_inductance(lo, &s).unwrap() >= s.l0);
        }
    }
}
