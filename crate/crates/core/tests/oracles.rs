//! Frozen reference values. A change here means the physics changed.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use doppler_lab::characteristics::{
    centre_shift, condition_boundaries, Condition, FrontVelocity, OracleConfig,
};
use doppler_lab::experiments::{builtin, run_scenario, RunOptions};
use doppler_lab::line::{current_for_shift, shift_from_current};
use doppler_lab::LineSpec;

const TWO_PI: f64 = 2.0 * PI;

#[test]
fn shift_law_at_four_gigahertz() {
    let line = LineSpec::default();
    let w = TWO_PI * 4e9;
    for (i, f) in [
        (1e-3, -2.643928878313e7),
        (1.62e-3, -6.938726948245e7),
        (2e-3, -1.057571551325e8),
    ] {
        let got = shift_from_current(w, i, &line).unwrap() / TWO_PI;
        assert_relative_eq!(got, f, max_relative = 1e-10);
    }
}

#[test]
fn shift_law_inverts() {
    let line = LineSpec::default();
    let i = current_for_shift(TWO_PI * 500e6, TWO_PI * 14e6, &line).unwrap();
    assert_relative_eq!(i, 2.058183665274e-3, max_relative = 1e-10);
    let back = shift_from_current(TWO_PI * 500e6, i, &line).unwrap();
    assert_relative_eq!(back.abs(), TWO_PI * 14e6, max_relative = 1e-9);
}

#[test]
fn packet_centre_shifts_of_the_four_encounters() {
    let s = builtin("fig2").unwrap();
    let cfg = OracleConfig::default().with_front(FrontVelocity::Midpoint);
    let want = [0.0, -6.679595785596e7, 0.0, 6.793032564825e7];
    for (run, f) in s.runs().iter().zip(want) {
        let wp = s.packet_for(run);
        let cp = s.pulse_for(run);
        let got = centre_shift(&s.line, &wp, cp.as_ref(), &cfg).unwrap() / TWO_PI;
        if f == 0.0 {
            assert!(got.abs() < 1.0, "{}: {got}", run.id);
        } else {
            assert_relative_eq!(got, f, max_relative = 1e-9);
        }
    }
}

#[test]
fn encounter_boundaries_of_the_delay_sweep() {
    let s = builtin("fig3").unwrap();
    let b = condition_boundaries(&s.line, &s.wp, s.pulse().unwrap()).unwrap();
    let want = [
        (-47.4e-9, Condition::RedOnly),
        (-7.6e-9, Condition::Cancel),
        (32.6e-9, Condition::BlueOnly),
        (72.4e-9, Condition::NoMeeting),
    ];
    assert_eq!(b.len(), want.len());
    for ((t, c), (wt, wc)) in b.iter().zip(want) {
        assert!((t - wt).abs() < 1e-12, "{t} vs {wt}");
        assert_eq!(*c, wc);
    }
}

/// Full solver regression: the rising-front run of the four-encounter scenario.
#[test]
fn solver_rising_front_shift_is_frozen() {
    let mut s = builtin("fig2").unwrap();
    s.delays = vec![-32.5e-9];
    s.ddc_plan.remove(0);
    let res = run_scenario(&s, &RunOptions::default()).unwrap();
    let got = res.runs[0].phase_shift_hz().unwrap();
    assert!((got - -6.666952474e7).abs() < 1e4, "{got}");
}
