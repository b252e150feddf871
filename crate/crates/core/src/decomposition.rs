//! Tucker representation, truncated SVD through Gram eigendecomposition, and
//! the HOSVD retraction in its dense and structured (compact) forms.

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, sign_flips, sym_eigen_desc, Matrix};
use crate::tensor::{
    extremes_from_spectra, mode_gram, mode_product_unchecked, multi_mode_product, DenseTensor3,
    Mode, RANK_TOLERANCE,
};

/// Tolerance on `‖XᵢᵀXᵢ − I‖_F` for factors of a valid Tucker form.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Relative tolerance under which `σ_r` and `σ_{r+1}` count as tied.
pub const GAP_TOL: f64 = 1e-12;

/// `X = G ×₁ X₁ ×₂ X₂ ×₃ X₃` with orthonormal factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerForm {
    core: DenseTensor3,
    factors: [Matrix; 3],
}

impl TuckerForm {
    /// Validates shapes and factor orthonormality.
    pub fn new(core: DenseTensor3, factors: [Matrix; 3]) -> Result<Self> {
        check_factor_shapes(&core, &factors)?;
        for (i, f) in factors.iter().enumerate() {
            let dev = orthonormality_defect(f);
            if !(dev <= ORTHONORMAL_TOL) {
                return Err(Error::NotOrthonormal {
                    mode: i + 1,
                    deviation: dev,
                });
            }
        }
        Ok(TuckerForm { core, factors })
    }

    pub(crate) fn from_parts(core: DenseTensor3, factors: [Matrix; 3]) -> Self {
        debug_assert!(check_factor_shapes(&core, &factors).is_ok());
        TuckerForm { core, factors }
    }

    pub fn core(&self) -> &DenseTensor3 {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix; 3] {
        &self.factors
    }

    pub fn factor(&self, mode: Mode) -> &Matrix {
        &self.factors[mode.index()]
    }

    /// Multilinear rank of the representation (the core dimensions).
    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    /// Common rank when the core is cubic.
    pub fn rank(&self) -> usize {
        self.core.dims()[0]
    }

    /// Ambient dimensions of the represented tensor.
    pub fn dims(&self) -> [usize; 3] {
        [
            self.factors[0].nrows(),
            self.factors[1].nrows(),
            self.factors[2].nrows(),
        ]
    }

    /// Largest `‖XᵢᵀXᵢ − I‖_F` over the three factors.
    pub fn orthonormality_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(orthonormality_defect)
            .fold(0.0, f64::max)
    }

    /// Dense expansion.
    pub fn to_full(&self) -> DenseTensor3 {
        tucker_to_full(self)
    }

    /// Single entry, zero-based indices.
    pub fn entry(&self, i: usize, j: usize, k: usize) -> f64 {
        let [r1, r2, r3] = self.core.dims();
        let (x1, x2, x3) = (&self.factors[0], &self.factors[1], &self.factors[2]);
        let g = self.core.as_slice();
        let mut s = 0.0;
        for c in 0..r3 {
            for b in 0..r2 {
                let w = x2[(j, b)] * x3[(k, c)];
                let base = r1 * (b + r2 * c);
                let mut row = 0.0;
                for a in 0..r1 {
                    row += g[base + a] * x1[(i, a)];
                }
                s += row * w;
            }
        }
        s
    }

    /// The same point with the core scaled by `s`.
    pub fn scaled(&self, s: f64) -> TuckerForm {
        TuckerForm {
            core: self.core.scale(s),
            factors: self.factors.clone(),
        }
    }

    /// `(σ_max, σ_min)` of the represented tensor, evaluated on the core.
    ///
    /// Orthonormal factors leave the unfolding singular values unchanged, so
    /// this matches [`crate::tensor::sigma_extremes`] on the dense expansion.
    pub fn sigma_extremes(&self, r: usize) -> Result<(f64, f64)> {
        let spectra: Vec<Vec<f64>> = Mode::ALL
            .iter()
            .map(|&m| crate::tensor::mode_singular_values(&self.core, m))
            .collect();
        extremes_from_spectra(&spectra, r)
    }
}

fn check_factor_shapes(core: &DenseTensor3, factors: &[Matrix; 3]) -> Result<()> {
    let dims = core.dims();
    for (i, f) in factors.iter().enumerate() {
        if f.ncols() != dims[i] {
            return Err(Error::ShapeMismatch(format!(
                "factor {} has {} columns, core dimension is {}",
                i + 1,
                f.ncols(),
                dims[i]
            )));
        }
    }
    Ok(())
}

/// Tucker-structured tensor of width `k ≤ 2r` per mode, used to hold the
/// pre-retraction iterate without densifying it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactForm {
    pub core: DenseTensor3,
    pub factors: [Matrix; 3],
}

impl CompactForm {
    pub fn new(core: DenseTensor3, factors: [Matrix; 3]) -> Result<Self> {
        check_factor_shapes(&core, &factors)?;
        Ok(CompactForm { core, factors })
    }

    pub fn width(&self) -> [usize; 3] {
        self.core.dims()
    }

    pub fn to_full(&self) -> DenseTensor3 {
        expand(&self.core, &self.factors)
    }
}

fn expand(core: &DenseTensor3, factors: &[Matrix; 3]) -> DenseTensor3 {
    let y = mode_product_unchecked(core, &factors[0], Mode::One);
    let y = mode_product_unchecked(&y, &factors[1], Mode::Two);
    mode_product_unchecked(&y, &factors[2], Mode::Three)
}

/// `G ×₁ X₁ ×₂ X₂ ×₃ X₃`.
pub fn tucker_to_full(t: &TuckerForm) -> DenseTensor3 {
    expand(&t.core, &t.factors)
}

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct TopEigen {
    /// `n × r` orthonormal eigenvectors, sign-normalized.
    pub vectors: Matrix,
    /// The `r` algebraically largest eigenvalues, descending.
    pub values: Vec<f64>,
    /// `λ_r` and `λ_{r+1}` are tied within [`GAP_TOL`].
    pub degenerate_gap: bool,
}

/// Top-`r` eigenpairs of a symmetric matrix (no positivity assumed).
pub fn top_r_eigen(sym: &Matrix, r: usize) -> Result<TopEigen> {
    if r == 0 || r > sym.nrows() {
        return Err(Error::InvalidArgument(format!(
            "rank {r} for a {}×{} matrix",
            sym.nrows(),
            sym.ncols()
        )));
    }
    let (vals, vecs) = sym_eigen_desc(sym);
    let degenerate_gap = match vals.get(r) {
        Some(&next) => {
            let scale = vals[r - 1].abs().max(vals[0].abs());
            (vals[r - 1] - next).abs() <= GAP_TOL * scale
        }
        None => false,
    };
    Ok(TopEigen {
        vectors: vecs.columns(0, r).into_owned(),
        values: vals[..r].to_vec(),
        degenerate_gap,
    })
}

/// Leading left singular subspace of a matrix.
#[derive(Debug, Clone)]
pub struct SingularSubspace {
    pub basis: Matrix,
    pub sigmas: Vec<f64>,
    /// `σ_r ≈ σ_{r+1}`: the subspace is not uniquely determined.
    pub degenerate_gap: bool,
}

/// Top-`r` left singular vectors of `M` from the eigendecomposition of `MMᵀ`.
pub fn top_r_left_singular(m: &Matrix, r: usize) -> Result<SingularSubspace> {
    if r > m.nrows() {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds the {} rows of the matrix",
            m.nrows()
        )));
    }
    singular_from_gram(&(m * m.transpose()), r)
}

fn singular_from_gram(gram: &Matrix, r: usize) -> Result<SingularSubspace> {
    let top = top_r_eigen(gram, r)?;
    let sigmas: Vec<f64> = top.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let s1 = sigmas[0];
    let sr = sigmas[r - 1];
    if s1 == 0.0 || sr < RANK_TOLERANCE * s1 {
        return Err(Error::DegenerateRank {
            rank: r,
            sigma_r: sr,
            sigma_1: s1,
        });
    }
    Ok(SingularSubspace {
        basis: top.vectors,
        sigmas,
        degenerate_gap: top.degenerate_gap,
    })
}

/// Result of a rank-`r` HOSVD together with the spectral information that
/// produced it.
#[derive(Debug, Clone)]
pub struct Retraction {
    pub form: TuckerForm,
    /// Leading `r` singular values of each unfolding.
    pub sigmas: [Vec<f64>; 3],
    pub degenerate_gap: [bool; 3],
}

/// Truncated higher-order SVD `H_r(X)`.
pub fn hosvd(x: &DenseTensor3, r: usize) -> Result<TuckerForm> {
    hosvd_detailed(x, r).map(|h| h.form)
}

pub fn hosvd_detailed(x: &DenseTensor3, r: usize) -> Result<Retraction> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be positive".into()));
    }
    let mut subspaces = Vec::with_capacity(3);
    for m in Mode::ALL {
        if r > x.dim(m) {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds dimension {} of mode {m:?}",
                x.dim(m)
            )));
        }
        subspaces.push(singular_from_gram(&mode_gram(x, m), r)?);
    }
    let factors = [
        subspaces[0].basis.clone(),
        subspaces[1].basis.clone(),
        subspaces[2].basis.clone(),
    ];
    let t0 = factors[0].transpose();
    let t1 = factors[1].transpose();
    let t2 = factors[2].transpose();
    let core = multi_mode_product(x, [&t0, &t1, &t2])?;
    Ok(Retraction {
        form: TuckerForm::from_parts(core, factors),
        sigmas: [
            subspaces[0].sigmas.clone(),
            subspaces[1].sigmas.clone(),
            subspaces[2].sigmas.clone(),
        ],
        degenerate_gap: [
            subspaces[0].degenerate_gap,
            subspaces[1].degenerate_gap,
            subspaces[2].degenerate_gap,
        ],
    })
}

/// Rank-`r` HOSVD of a compact form, computed on its small core.
///
/// With orthonormal `Qᵢ`, `Mᵢ(S) = Qᵢ·Mᵢ(C)·(Q_k ⊗ Q_j)ᵀ`, so the left
/// singular vectors of `Mᵢ(S)` are `Qᵢ` times those of `Mᵢ(C)`. Cost is
/// `O(nk r + k⁴)` instead of the `O(n⁴)` dense route.
pub fn compact_hosvd(s: &CompactForm, r: usize) -> Result<TuckerForm> {
    compact_hosvd_detailed(s, r).map(|h| h.form)
}

pub fn compact_hosvd_detailed(s: &CompactForm, r: usize) -> Result<Retraction> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be positive".into()));
    }
    let mut factors: Vec<Matrix> = Vec::with_capacity(3);
    let mut rotations: Vec<Matrix> = Vec::with_capacity(3);
    let mut sigmas: Vec<Vec<f64>> = Vec::with_capacity(3);
    let mut gaps = [false; 3];
    for m in Mode::ALL {
        let k = s.core.dim(m);
        if r > k {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds compact width {k} in mode {m:?}"
            )));
        }
        let sub = singular_from_gram(&mode_gram(&s.core, m), r)?;
        let mut v = sub.basis;
        let mut lifted = &s.factors[m.index()] * &v;
        // Sign convention is fixed on the lifted factor so the result agrees
        // with the dense route.
        for (c, flip) in sign_flips(&lifted).into_iter().enumerate() {
            if flip {
                lifted.column_mut(c).neg_mut();
                v.column_mut(c).neg_mut();
            }
        }
        factors.push(lifted);
        rotations.push(v);
        sigmas.push(sub.sigmas);
        gaps[m.index()] = sub.degenerate_gap;
    }
    let core = {
        let y = mode_product_unchecked(&s.core, &rotations[0].transpose(), Mode::One);
        let y = mode_product_unchecked(&y, &rotations[1].transpose(), Mode::Two);
        mode_product_unchecked(&y, &rotations[2].transpose(), Mode::Three)
    };
    let mut f = factors.into_iter();
    let mut sg = sigmas.into_iter();
    Ok(Retraction {
        form: TuckerForm::from_parts(
            core,
            [f.next().unwrap(), f.next().unwrap(), f.next().unwrap()],
        ),
        sigmas: [sg.next().unwrap(), sg.next().unwrap(), sg.next().unwrap()],
        degenerate_gap: gaps,
    })
}
