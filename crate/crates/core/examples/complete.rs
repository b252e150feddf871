//! Complete a generated tensor from 20% of its entries.
//!
//! Run with `cargo run --release --example complete`.

use tucker_completion::experiments::{complete, InitKind, RunSettings};
use tucker_completion::verification::Reference;
use tucker_completion::{gen_problem, ProblemSpec, Result};

fn main() -> Result<()> {
    let spec = ProblemSpec::new(60, 2, 0.2, 5);
    let problem = gen_problem(&spec)?;
    println!(
        "n = {}, r = {}, observed {} of {} entries, mu = {:.2}, kappa = {:.2}",
        spec.n,
        spec.r,
        problem.obs.len(),
        spec.n.pow(3),
        problem.mu,
        problem.kappa
    );

    let reference = Reference::with_full(problem.truth.clone(), problem.full.clone())?;
    let settings = RunSettings {
        init: InitKind::Dd,
        ..RunSettings::default()
    };
    let trace = complete(&problem.obs, spec.p, spec.r, &settings, Some(&reference))?;
    for rec in trace.records.iter().step_by(3) {
        println!(
            "iter {:>3}  observed residual {:.3e}  relative error {:.3e}",
            rec.iter,
            rec.rel_res_obs,
            rec.rel_fro.unwrap_or(f64::NAN)
        );
    }
    println!("stopped: {:?} after {} iterates", trace.stop, trace.last().iter);
    Ok(())
}
