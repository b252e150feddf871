//! Analysis oracles: aligned error metrics, the residual-tensor identity, an
//! independent evaluation of the tangent projector, and leave-one-out runs.
//!
//! Everything here favors independence from the production path over speed.
//! The projector oracle, for instance, never touches `Mᵢ(G)†` and instead
//! goes through the right singular vectors of the dense unfoldings.

use crate::decomposition::{hosvd, TuckerForm};
use crate::error::{Error, Result};
use crate::initialization::{init_from_weighted, Deletion};
use crate::linalg::{svd, sym_eigen_desc, thin_qr, two_inf_norm, Matrix};
use crate::riemannian::{core_pinv, step_from_gradient, RetractionPath};
use crate::sampling::{evaluate_at, split_mask_slice, Coord, Mask, SampleSet};
use crate::tensor::{
    dematricize, matricize, mode_product_unchecked, DenseTensor3, Mode, RANK_TOLERANCE,
};

/// Ground truth with the norms the metrics divide by.
#[derive(Debug, Clone)]
pub struct Reference {
    truth: TuckerForm,
    full: DenseTensor3,
    fro: f64,
    inf: f64,
    factor_2inf: [f64; 3],
}

impl Reference {
    pub fn new(truth: TuckerForm) -> Self {
        let full = truth.to_full();
        Self::with_full(truth, full).expect("expansion matches its own dims")
    }

    pub fn with_full(truth: TuckerForm, full: DenseTensor3) -> Result<Self> {
        if truth.dims() != full.dims() {
            return Err(Error::ShapeMismatch(format!(
                "truth dims {:?} vs tensor dims {:?}",
                truth.dims(),
                full.dims()
            )));
        }
        let (fro, inf) = full.norms();
        let factor_2inf = [0, 1, 2].map(|i| two_inf_norm(&truth.factors()[i]));
        Ok(Reference {
            truth,
            full,
            fro,
            inf,
            factor_2inf,
        })
    }

    pub fn truth(&self) -> &TuckerForm {
        &self.truth
    }

    pub fn full(&self) -> &DenseTensor3 {
        &self.full
    }
}

/// Orthogonal Procrustes solution.
#[derive(Debug, Clone)]
pub struct Procrustes {
    pub rotation: Matrix,
    /// `XᵀU` is numerically rank deficient, so the minimizer is not unique.
    pub ambiguous: bool,
}

/// `argmin_{RᵀR = I} ‖XR − U‖_F`, given by `R = ABᵀ` for `XᵀU = AΣBᵀ`.
pub fn procrustes(x: &Matrix, u: &Matrix) -> Result<Procrustes> {
    if x.shape() != u.shape() {
        return Err(Error::ShapeMismatch(format!(
            "procrustes of {:?} and {:?}",
            x.shape(),
            u.shape()
        )));
    }
    let d = svd(&x.tr_mul(u));
    let smin = d.sigma.last().copied().unwrap_or(0.0);
    let ambiguous = !(smin > RANK_TOLERANCE);
    Ok(Procrustes {
        rotation: d.u * d.v.transpose(),
        ambiguous,
    })
}

/// Error metrics of an iterate against the ground truth.
#[derive(Debug, Clone)]
pub struct AlignedMetrics {
    /// `‖X − T‖_∞ / ‖T‖_∞`
    pub rel_inf: f64,
    /// `‖X − T‖_F / ‖T‖_F`
    pub rel_fro: f64,
    /// `‖XᵢRᵢ − Uᵢ‖_{2,∞} / ‖Uᵢ‖_{2,∞}` per mode.
    pub rel_2inf: [f64; 3],
    pub rotations: [Matrix; 3],
}

/// Metrics of `x` against `reference`.
///
/// The difference is formed one frontal slice at a time, so the dense
/// expansion of `x` is never held in memory.
pub fn metrics(x: &TuckerForm, reference: &Reference) -> Result<AlignedMetrics> {
    if x.dims() != reference.full.dims() {
        return Err(Error::ShapeMismatch(format!(
            "iterate dims {:?} vs truth dims {:?}",
            x.dims(),
            reference.full.dims()
        )));
    }
    let (fro, inf) = diff_norms(x, &reference.full);
    let mut rotations: Vec<Matrix> = Vec::with_capacity(3);
    let mut rel_2inf = [0.0; 3];
    for m in Mode::ALL {
        let u = reference.truth.factor(m);
        let xi = x.factor(m);
        if xi.ncols() != u.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "mode {} rank {} vs truth rank {}",
                m.index() + 1,
                xi.ncols(),
                u.ncols()
            )));
        }
        let r = procrustes(xi, u)?.rotation;
        rel_2inf[m.index()] = two_inf_norm(&(xi * &r - u)) / reference.factor_2inf[m.index()];
        rotations.push(r);
    }
    let mut it = rotations.into_iter();
    Ok(AlignedMetrics {
        rel_inf: inf / reference.inf,
        rel_fro: fro / reference.fro,
        rel_2inf,
        rotations: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    })
}

/// `(‖X − T‖_F, ‖X − T‖_∞)`, slice by slice.
fn diff_norms(x: &TuckerForm, t: &DenseTensor3) -> (f64, f64) {
    let [n1, n2, n3] = t.dims();
    let [r1, r2, r3] = x.ranks();
    let [x1, x2, x3] = x.factors();
    let g = x.core().as_slice();
    let left = x1.clone();
    let right_t = x2.transpose();
    let mut sq = 0.0;
    let mut inf = 0.0f64;
    for k in 0..n3 {
        let mut s = Matrix::zeros(r1, r2);
        for c in 0..r3 {
            let w = x3[(k, c)];
            for b in 0..r2 {
                for a in 0..r1 {
                    s[(a, b)] += w * g[a + r1 * (b + r2 * c)];
                }
            }
        }
        let slice = &left * s * &right_t;
        let tk = &t.as_slice()[k * n1 * n2..(k + 1) * n1 * n2];
        for (v, tv) in slice.as_slice().iter().zip(tk) {
            let d = v - tv;
            sq += d * d;
            inf = inf.max(d.abs());
        }
    }
    (sq.sqrt(), inf)
}

/// Sum-of-projectors evaluation of `P_{T_X}(Z)`:
///
/// ```text
/// Z ×ᵢ XᵢXᵢᵀ + Σᵢ (I − XᵢXᵢᵀ)-in-mode-i applied to P^{(j≠i)}(Z),
/// Mᵢ(P^{(j≠i)}(Z)) = Mᵢ(Z) YᵢYᵢᵀ
/// ```
///
/// with `Yᵢ` an orthonormal basis of the row space of `Mᵢ(X)`, computed from
/// the dense unfolding.
pub fn projector_oracle(point: &TuckerForm, z: &DenseTensor3) -> Result<DenseTensor3> {
    let dims = point.dims();
    if z.dims() != dims {
        return Err(Error::ShapeMismatch(format!(
            "tensor dims {:?} vs point dims {dims:?}",
            z.dims()
        )));
    }
    for m in Mode::ALL {
        core_pinv(point.core(), m)?;
    }
    let x = point.to_full();
    let projectors = point.factors().clone().map(|f| &f * f.transpose());
    let mut out = z.clone();
    for m in Mode::ALL {
        out = mode_product_unchecked(&out, &projectors[m.index()], m);
    }
    for m in Mode::ALL {
        let r = point.factor(m).ncols();
        // Yᵢ spans the row space of Mᵢ(X): orthonormalize Mᵢ(X)ᵀUᵢ where Uᵢ
        // holds the top left singular vectors from the n×n Gram.
        let mx = matricize(&x, m);
        let (_, vecs) = sym_eigen_desc(&(&mx * mx.transpose()));
        let y = thin_qr(&(mx.tr_mul(&vecs.columns(0, r).into_owned()))).0;
        let zi = matricize(z, m);
        let kept = &zi * &y * y.transpose();
        let xi = point.factor(m);
        let perp = &kept - xi * xi.tr_mul(&kept);
        let term = dematricize(&perp, m, dims)?;
        out = out.add(&term)?;
    }
    Ok(out)
}

/// `‖X⁺ − H_r(T + Eᵗ)‖_F / ‖T‖_F` with `Eᵗ = (I − p⁻¹P_T P_Ω)(X − T)`,
/// evaluated densely with the oracle projector.
pub fn residual_identity_check(
    x_t: &TuckerForm,
    x_next: &TuckerForm,
    obs: &SampleSet,
    t_full: &DenseTensor3,
    p: f64,
) -> Result<f64> {
    let diff = x_t.to_full().sub(t_full)?;
    let indicator = obs.mask().indicator();
    let sampled = DenseTensor3::from_raw(
        diff.dims(),
        diff.as_slice()
            .iter()
            .zip(indicator.as_slice())
            .map(|(d, m)| d * m / p)
            .collect(),
    );
    let e = diff.sub(&projector_oracle(x_t, &sampled)?)?;
    let target = hosvd(&t_full.add(&e)?, x_t.rank())?;
    let dev = x_next.to_full().sub(&target.to_full())?.fro_norm();
    Ok(dev / t_full.fro_norm())
}

/// The ℓ-th leave-one-out problem: observations off slice `ℓ` at weight
/// `p⁻¹` merged with every entry of the slice at weight `1`.
#[derive(Debug, Clone)]
pub struct LooProblem {
    pub ell: usize,
    coords: Vec<Coord>,
    truth_values: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
}

impl LooProblem {
    /// Builds the weighted sample set; `ell` is zero-based.
    ///
    /// Only `mask` coordinates off the slice are read, so any change to the
    /// mask on the slice yields the same problem.
    pub fn new(t_full: &DenseTensor3, mask: &Mask, ell: usize, p: f64) -> Result<Self> {
        let n = mask.n();
        if t_full.dims() != [n; 3] {
            return Err(Error::ShapeMismatch(format!(
                "tensor dims {:?} vs mask dimension {n}",
                t_full.dims()
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("sampling rate {p} outside (0, 1]")));
        }
        let (off, slice) = split_mask_slice(mask, ell)?;
        let inv = 1.0 / p;
        let mut merged: Vec<(Coord, f64)> = off
            .coords()
            .iter()
            .map(|&c| (c, inv))
            .chain(slice.into_iter().map(|c| (c, 1.0)))
            .collect();
        merged.sort_unstable_by_key(|&(c, _)| c);
        let coords: Vec<Coord> = merged.iter().map(|&(c, _)| c).collect();
        let weights = merged.iter().map(|&(_, w)| w).collect();
        let truth_values = coords
            .iter()
            .map(|c| t_full.get(c[0] as usize, c[1] as usize, c[2] as usize))
            .collect();
        Ok(LooProblem {
            ell,
            coords,
            truth_values,
            weights,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn weighted_truth(&self) -> Vec<f64> {
        self.truth_values
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .collect()
    }

    fn weighted_gradient(&self, x: &TuckerForm) -> Result<SampleSet> {
        let vals = evaluate_at(x, &self.coords)
            .into_iter()
            .zip(self.truth_values.iter().zip(&self.weights))
            .map(|(v, (t, w))| w * (v - t))
            .collect();
        let mask = Mask::from_coords(self.n, self.coords.clone(), 1.0, None)?;
        SampleSet::new(mask, vals)
    }
}

/// Runs the ℓ-th leave-one-out sequence: spectral initialization with
/// diagonal deletion on the weighted data, then `iters` updates. Returns the
/// initial point followed by every iterate.
pub fn loo_run(
    t_full: &DenseTensor3,
    mask: &Mask,
    ell: usize,
    p: f64,
    r: usize,
    iters: usize,
    path: RetractionPath,
) -> Result<Vec<TuckerForm>> {
    let problem = LooProblem::new(t_full, mask, ell, p)?;
    let init = init_from_weighted(
        problem.n,
        &problem.coords,
        &problem.weighted_truth(),
        r,
        Deletion::On,
    )?;
    let mut out = vec![init.form];
    for _ in 0..iters {
        let x = out.last().expect("nonempty");
        let grad = problem.weighted_gradient(x)?;
        let next = step_from_gradient(x, &grad, r, path)?.form;
        out.push(next);
    }
    Ok(out)
}

/// Plain iterates from a given start, for pairing with a leave-one-out run.
pub fn rgm_iterates(
    init: &TuckerForm,
    obs: &SampleSet,
    p: f64,
    iters: usize,
    path: RetractionPath,
) -> Result<Vec<TuckerForm>> {
    if obs.is_empty() {
        return Err(Error::InsufficientSamples);
    }
    let r = init.rank();
    let inv = 1.0 / p;
    let mut out = vec![init.clone()];
    for _ in 0..iters {
        let x = out.last().expect("nonempty");
        let grad = crate::sampling::sparse_residual(x, obs)?.map_values(|v| v * inv);
        out.push(step_from_gradient(x, &grad, r, path)?.form);
    }
    Ok(out)
}

/// One row of the leave-one-out diagnostic CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LooDiagnostic {
    pub iter: usize,
    pub ell: usize,
    /// `‖X^{t,ℓ} − X^t‖_F / σ_max(T)`
    pub dist_fro_to_main: f64,
    /// `‖X^t − T‖_F / σ_max(T)`
    pub rel_err_main: f64,
}

pub const LOO_CSV_HEADER: &str = "iter,ell,dist_fro_to_main,rel_err_main";

/// Pairs a leave-one-out sequence with the main sequence.
pub fn loo_diagnostics(
    main: &[TuckerForm],
    loo: &[TuckerForm],
    reference: &Reference,
    ell: usize,
) -> Result<Vec<LooDiagnostic>> {
    let r = reference.truth.rank();
    let (sigma_max, _) = reference.truth.sigma_extremes(r)?;
    main.iter()
        .zip(loo)
        .enumerate()
        .map(|(t, (xm, xl))| {
            let em = xm.to_full();
            Ok(LooDiagnostic {
                iter: t + 1,
                ell,
                dist_fro_to_main: xl.to_full().sub(&em)?.fro_norm() / sigma_max,
                rel_err_main: em.sub(&reference.full)?.fro_norm() / sigma_max,
            })
        })
        .collect()
}

pub fn loo_csv(rows: &[LooDiagnostic]) -> String {
    let mut s = String::from(LOO_CSV_HEADER);
    s.push('\n');
    for d in rows {
        s.push_str(&format!(
            "{},{},{:e},{:e}\n",
            d.iter, d.ell, d.dist_fro_to_main, d.rel_err_main
        ));
    }
    s
}
