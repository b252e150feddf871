//! Write a problem to the binary formats and read it back.
//!
//! Run with `cargo run --example binary_io -- [dir]`.

use std::path::PathBuf;

use tucker_completion::io::{load_mask, load_samples, load_tensor, save_mask, save_samples, save_tensor};
use tucker_completion::{gen_problem, ProblemSpec, Result};

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let pr = gen_problem(&ProblemSpec::new(16, 2, 0.25, 3))?;

    let (t, m, s) = (dir.join("demo.tkt3"), dir.join("demo.tkm3"), dir.join("demo.tks3"));
    save_tensor(&t, &pr.full)?;
    save_mask(&m, pr.obs.mask())?;
    save_samples(&s, &pr.obs)?;

    assert_eq!(load_tensor(&t)?, pr.full);
    assert_eq!(load_mask(&m)?.coords(), pr.obs.coords());
    assert_eq!(load_samples(&s)?.values(), pr.obs.values());
    for p in [&t, &m, &s] {
        println!("{} ({} bytes)", p.display(), std::fs::metadata(p)?.len());
    }
    Ok(())
}
