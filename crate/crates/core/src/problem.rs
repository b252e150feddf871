//! Seeded synthetic completion problems.
//!
//! The recipe: three `n × r` standard-normal matrices orthonormalized by QR,
//! a standard-normal `r × r × r` core, and optionally a reshaping of the
//! core's mode spectra toward a target condition number. Observations are
//! drawn with the mask seed `seed ^ 1`, so the truth and the sampling use
//! unrelated random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decomposition::{hosvd_detailed, TuckerForm};
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, Matrix};
use crate::sampling::{bernoulli_mask, incoherence, observe, SampleSet};
use crate::tensor::{matricize, mode_product_unchecked, DenseTensor3, Mode};

/// Parameters of a generated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub kappa_target: Option<f64>,
    pub p: f64,
}

impl ProblemSpec {
    pub fn new(n: usize, r: usize, p: f64, seed: u64) -> Self {
        ProblemSpec {
            n,
            r,
            seed,
            kappa_target: None,
            p,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa_target = Some(kappa);
        self
    }

    pub fn mask_seed(&self) -> u64 {
        self.seed ^ 1
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.n {
            return Err(Error::InvalidArgument(format!(
                "need n ≥ r ≥ 1, got n = {}, r = {}",
                self.n, self.r
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("sampling rate {}", self.p)));
        }
        if let Some(k) = self.kappa_target {
            if !(k >= 1.0) || !k.is_finite() {
                return Err(Error::InfeasibleKappa(k));
            }
        }
        Ok(())
    }
}

/// A generated instance with its measured parameters.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub truth: TuckerForm,
    pub full: DenseTensor3,
    pub obs: SampleSet,
    /// Incoherence of the truth's factors.
    pub mu: f64,
    /// `σ_max / σ_min` over the three unfoldings.
    pub kappa: f64,
}

/// Draws the ground truth only.
pub fn gen_truth(spec: &ProblemSpec) -> Result<TuckerForm> {
    spec.validate()?;
    let (n, r) = (spec.n, spec.r);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gaussian = |rows: usize, cols: usize| -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    };
    let factors = [thin_qr(&gaussian(n, r)).0, thin_qr(&gaussian(n, r)).0, thin_qr(&gaussian(n, r)).0];
    let core_vals = gaussian(r * r * r, 1);
    let core = DenseTensor3::from_vec([r; 3], core_vals.as_slice().to_vec())?;
    let (core, rotations) = match spec.kappa_target {
        Some(k) => shape_spectrum(&core, k)?,
        None => (core, [(); 3].map(|_| Matrix::identity(r, r))),
    };
    let factors = [0, 1, 2].map(|i| &factors[i] * &rotations[i]);
    TuckerForm::new(core, factors)
}

/// Generates truth, dense tensor and observations.
pub fn gen_problem(spec: &ProblemSpec) -> Result<Problem> {
    let truth = gen_truth(spec)?;
    let full = truth.to_full();
    let mask = bernoulli_mask(spec.n, spec.p, spec.mask_seed())?;
    let obs = observe(&full, &mask)?;
    let mu = incoherence(truth.factors())?;
    let (smax, smin) = truth.sigma_extremes(spec.r)?;
    Ok(Problem {
        spec: spec.clone(),
        truth,
        full,
        obs,
        mu,
        kappa: smax / smin,
    })
}

/// Rescales the core toward mode spectra that decay geometrically from `1`
/// to `1/κ`.
///
/// Each round takes the HOSVD of the current core, which makes it
/// all-orthogonal with the mode singular values as row norms of its
/// unfoldings, and rescales the slices of one mode to the target values.
/// Rescaling one mode perturbs the others, so the rounds repeat until the
/// measured ratio settles. Returns the core and the accumulated rotations,
/// which must be applied to the factors.
fn shape_spectrum(core: &DenseTensor3, kappa: f64) -> Result<(DenseTensor3, [Matrix; 3])> {
    let r = core.dim(Mode::One);
    let target: Vec<f64> = (0..r)
        .map(|a| {
            if r == 1 {
                1.0
            } else {
                kappa.powf(-(a as f64) / (r - 1) as f64)
            }
        })
        .collect();
    let mut g = core.clone();
    let mut rot = [(); 3].map(|_| Matrix::identity(r, r));
    for _round in 0..60 {
        let h = hosvd_detailed(&g, r)?;
        for (acc, v) in rot.iter_mut().zip(h.form.factors()) {
            *acc = &*acc * v;
        }
        g = h.form.core().clone();
        for m in Mode::ALL {
            let rows = matricize(&g, m);
            let norms: Vec<f64> = rows.row_iter().map(|row| row.norm()).collect();
            let scale = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
                r,
                norms.iter().zip(&target).map(|(s, t)| t / s),
            ));
            g = mode_product_unchecked(&g, &scale, m);
        }
        if r == 1 {
            break;
        }
    }
    let h = hosvd_detailed(&g, r)?;
    for (acc, v) in rot.iter_mut().zip(h.form.factors()) {
        *acc = &*acc * v;
    }
    Ok((h.form.core().clone(), rot))
}
