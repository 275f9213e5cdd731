//! Agreement of the three shift estimates on every run of a scenario.
//!
//!     cargo run --release --example cross_validation -- [builtin]

use doppler_lab::experiments::{builtin, cross_validate, RunOptions};
use doppler_lab::Result;

fn main() -> Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "fig2".into());
    let (_, cv) = cross_validate(&builtin(&name)?, &RunOptions::default())?;
    print!("{}", cv.to_csv());
    Ok(())
}
