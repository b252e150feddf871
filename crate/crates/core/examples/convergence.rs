//! Trace the aligned error metrics of a run and write them as CSV.
//!
//! Run with `cargo run --release --example convergence -- [out.csv]`.

use std::fs;

use tucker_completion::experiments::{convergence_run, RunSettings};
use tucker_completion::{ProblemSpec, Result};

fn main() -> Result<()> {
    let spec = ProblemSpec::new(100, 3, 0.3, 7);
    let (_, trace) = convergence_run(&spec, &RunSettings::default())?;

    let mut prev: Option<f64> = None;
    for rec in &trace.records {
        let e = rec.rel_inf.expect("ground truth supplied");
        let ratio = prev.map(|p| format!("{:.3}", e / p)).unwrap_or_default();
        println!("iter {:>3}  rel_inf {:.3e}  ratio {ratio}", rec.iter, e);
        prev = Some(e);
    }

    if let Some(out) = std::env::args().nth(1) {
        fs::write(&out, trace.to_csv(false))?;
        println!("wrote {out}");
    }
    Ok(())
}
