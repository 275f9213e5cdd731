//! Recovering the nonlinearity scale from shift-versus-amplitude data.
//! The data here come from the shift law plus a small quartic term and noise;
//! the `fig5` scenario produces the same kind of points from the solver.
//!
//!     cargo run --release --example amplitude_fit

use std::f64::consts::PI;

use doppler_lab::analysis::fit_amplitude_sweep;
use doppler_lab::line::shift_from_current;
use doppler_lab::{LineSpec, Result};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<()> {
    let w = 2.0 * PI * 4e9;
    let truth = LineSpec::default().with_c4(-0.3);
    let noise = Normal::new(0.0, 2.0 * PI * 0.2e6).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let points: Vec<(f64, f64)> = (1..=12)
        .map(|k| {
            let i = 0.175e-3 * k as f64;
            Ok((i, shift_from_current(w, i, &truth)? + noise.sample(&mut rng)))
        })
        .collect::<Result<_>>()?;
    let fit = fit_amplitude_sweep(&points, w)?;
    println!("true I* {:.4} mA, c4 {:.3}", truth.i_star * 1e3, truth.c4);
    println!(
        "fit  I* {:.4} ± {:.4} mA, c4 {:.3} ± {:.3}",
        fit.i_star_hat * 1e3,
        fit.var_i_star.sqrt() * 1e3,
        fit.c4_hat,
        fit.var_c4.sqrt()
    );
    println!("\n  I (mA)   data (MHz)   fit (MHz)");
    for (i, d) in &points {
        println!("  {:5.3}   {:9.3}   {:9.3}", i * 1e3, d / (2.0 * PI) / 1e6, fit.eval(*i) / (2.0 * PI) / 1e6);
    }
    Ok(())
}
