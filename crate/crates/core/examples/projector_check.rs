//! Compare the tangent-space projection against its sum-of-projectors form.
//!
//! Run with `cargo run --example projector_check`.

use tucker_completion::problem::{gen_truth, ProblemSpec};
use tucker_completion::riemannian::{tangent_project, tangent_to_full, Ambient};
use tucker_completion::tensor::{inner, DenseTensor3};
use tucker_completion::verification::projector_oracle;
use tucker_completion::Result;

fn main() -> Result<()> {
    let x = gen_truth(&ProblemSpec::new(12, 2, 1.0, 1))?;
    let z = DenseTensor3::from_fn([12; 3], |i, j, k| ((i + 2 * j + 3 * k) as f64).sin());

    let v = tangent_project(&x, Ambient::Dense(&z))?;
    let p = tangent_to_full(&x, &v);
    let oracle = projector_oracle(&x, &z)?;
    println!("‖P(Z)‖ = {:.6}", p.fro_norm());
    println!("relative gap to the oracle: {:.2e}", oracle.sub(&p)?.fro_norm() / p.fro_norm());

    let again = tangent_to_full(&x, &tangent_project(&x, Ambient::Dense(&p))?);
    println!("idempotence defect: {:.2e}", again.sub(&p)?.fro_norm() / p.fro_norm());

    let rest = z.sub(&p)?;
    println!("⟨P(Z), Z − P(Z)⟩ = {:.2e}", inner(&p, &rest)?);
    Ok(())
}
