//! Low-multilinear-rank tensor completion by Riemannian gradient descent.

// Argument checks use `!(x > y)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod initialization;
pub mod io;
pub mod linalg;
pub mod problem;
pub mod riemannian;
pub mod sampling;
pub mod tensor;
pub mod verification;

pub use decomposition::{compact_hosvd, hosvd, CompactForm, TuckerForm};
pub use error::{Error, Result};
pub use initialization::{spectral_init, Deletion, InitReport};
pub use linalg::Matrix;
pub use problem::{gen_problem, Problem, ProblemSpec};
pub use riemannian::{rgm_step, run_rgm, RetractionPath, RgmConfig, RunTrace};
pub use sampling::{bernoulli_mask, observe, Mask, SampleSet};
pub use tensor::{DenseTensor3, Mode};
