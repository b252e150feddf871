//! Success rate against the sampling rate, with and without diagonal
//! deletion in the spectral initialization.
//!
//! Run with `cargo run --release --example phase_sweep`. The worker pool
//! honors `TUCKER_THREADS`.

use tucker_completion::experiments::{parse_p_grid, phase_sweep, PhaseConfig};
use tucker_completion::Result;

fn main() -> Result<()> {
    let cfg = PhaseConfig::new(40, 2, parse_p_grid("0.04:0.24:6")?, 10, 1);
    let res = phase_sweep(&cfg)?;
    println!("{:>6}  {:>8}  {:>8}", "p", "dd", "no-dd");
    for (dd, nodd) in res.dd.iter().zip(&res.nodd) {
        println!("{:>6.3}  {:>8.2}  {:>8.2}", dd.p, dd.rate(), nodd.rate());
    }
    Ok(())
}
