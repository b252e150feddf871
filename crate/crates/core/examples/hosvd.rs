//! Truncated HOSVD of a noisy low-rank tensor.
//!
//! Run with `cargo run --example hosvd`.

use tucker_completion::problem::{gen_truth, ProblemSpec};
use tucker_completion::tensor::{mode_singular_values, DenseTensor3, Mode};
use tucker_completion::{hosvd, Result};

fn main() -> Result<()> {
    let truth = gen_truth(&ProblemSpec::new(30, 3, 1.0, 42))?;
    let t = truth.to_full();

    // a small deterministic perturbation on top of the rank-(3,3,3) tensor
    let noise = DenseTensor3::from_fn([30; 3], |i, j, k| ((i * 7 + j * 13 + k * 29) % 17) as f64 - 8.0);
    let noisy = t.add(&noise.scale(1e-4))?;

    for m in Mode::ALL {
        let s = mode_singular_values(&noisy, m);
        println!("mode {:?}: leading singular values {:.4?}", m, &s[..5]);
    }

    let x = hosvd(&noisy, 3)?;
    let err = x.to_full().sub(&t)?.fro_norm() / t.fro_norm();
    println!("ranks {:?}, relative error to the clean tensor {err:.3e}", x.ranks());
    Ok(())
}
