//! Leave-one-out sequences next to the main iteration.
//!
//! The ℓ-th sequence replaces the observations on slice ℓ by the exact
//! values, so it cannot depend on which of those entries were sampled. This
//! example checks that directly and reports how close the sequences stay.
//!
//! Run with `cargo run --release --example leave_one_out`.

use tucker_completion::initialization::{spectral_init, Deletion};
use tucker_completion::sampling::{split_mask_slice, Mask};
use tucker_completion::verification::{loo_csv, loo_diagnostics, loo_run, rgm_iterates, Reference};
use tucker_completion::{gen_problem, ProblemSpec, Result, RetractionPath};

fn main() -> Result<()> {
    let spec = ProblemSpec::new(30, 2, 0.5, 8);
    let pr = gen_problem(&spec)?;
    let path = RetractionPath::Structured;
    let iters = 8;

    let init = spectral_init(&pr.obs, spec.p, spec.r, Deletion::On)?;
    let main_seq = rgm_iterates(&init.form, &pr.obs, spec.p, iters, path)?;
    let reference = Reference::with_full(pr.truth.clone(), pr.full.clone())?;

    let ell = 11;
    let mask = pr.obs.mask();
    let loo = loo_run(&pr.full, mask, ell, spec.p, spec.r, iters, path)?;

    // drop every observation on the slice and rerun
    let (off, _) = split_mask_slice(mask, ell)?;
    let thinned = Mask::from_coords(spec.n, off.coords().to_vec(), spec.p, None)?;
    let again = loo_run(&pr.full, &thinned, ell, spec.p, spec.r, iters, path)?;
    println!("identical after removing slice {ell} from the mask: {}", loo == again);

    print!("{}", loo_csv(&loo_diagnostics(&main_seq, &loo, &reference, ell)?));
    Ok(())
}
