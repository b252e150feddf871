//! Spectral initialization from the sampled Gram matrices.
//!
//! For each mode the rescaled sample unfolding `T̂ᵢ = p⁻¹Mᵢ(P_Ω(T))` gives a
//! Gram matrix `T̂ᵢT̂ᵢᵀ`. Its diagonal is inflated by the sampling (each
//! observed entry pairs with itself at weight `p⁻²` instead of `1`), so the
//! default variant zeroes the diagonal before taking the top-`r`
//! eigenvectors. The core is then the scaled data contracted against the
//! three factors.

use crate::decomposition::{top_r_eigen, TuckerForm};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::{Coord, SampleSet};
use crate::tensor::{dematricize, DenseTensor3, Mode};

/// Whether the Gram diagonal is removed before the eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Deletion {
    #[default]
    On,
    Off,
}

/// Result of [`spectral_init`].
#[derive(Debug, Clone)]
pub struct InitReport {
    pub form: TuckerForm,
    /// Top-`r` eigenvalues of each mode's Gram, descending.
    pub eigenvalues: [Vec<f64>; 3],
    /// `λ_r ≈ λ_{r+1}` in some mode; the factor is then not unique.
    pub degenerate_gap: [bool; 3],
    /// Some of the top-`r` eigenvalues were `≤ 0` (can happen at tiny `p`
    /// once the diagonal is deleted).
    pub nonpositive: [bool; 3],
}

/// Copy of a square matrix with its diagonal zeroed.
pub fn offdiag(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "offdiag needs a square matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = m.clone();
    out.fill_diagonal(0.0);
    Ok(out)
}

/// `p⁻² Mᵢ(P_Ω(T)) Mᵢ(P_Ω(T))ᵀ` by a sparse sweep.
pub fn scaled_gram(obs: &SampleSet, p: f64, mode: Mode) -> Result<Matrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling rate {p} outside (0, 1]")));
    }
    let inv = 1.0 / p;
    let scaled: Vec<f64> = obs.values().iter().map(|v| v * inv).collect();
    Ok(weighted_gram(obs.n(), obs.coords(), &scaled, mode))
}

/// Gram of the unfolding of a sparse tensor given by coordinates and
/// (already weighted) values.
///
/// Entries are sorted by their column in the unfolding so that each column's
/// outer product is accumulated in a fixed order.
pub(crate) fn weighted_gram(n: usize, coords: &[Coord], values: &[f64], mode: Mode) -> Matrix {
    let m = mode.index();
    let (a, b) = match mode {
        Mode::One => (1, 2),
        Mode::Two => (0, 2),
        Mode::Three => (0, 1),
    };
    let mut keyed: Vec<(usize, u32, f64)> = coords
        .iter()
        .zip(values)
        .map(|(c, &v)| (c[a] as usize + n * c[b] as usize, c[m], v))
        .collect();
    keyed.sort_unstable_by_key(|&(col, row, _)| (col, row));

    let mut g = Matrix::zeros(n, n);
    let mut start = 0;
    while start < keyed.len() {
        let col = keyed[start].0;
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == col {
            end += 1;
        }
        let group = &keyed[start..end];
        for (s, &(_, ra, va)) in group.iter().enumerate() {
            g[(ra as usize, ra as usize)] += va * va;
            for &(_, rb, vb) in &group[s + 1..] {
                let x = va * vb;
                g[(ra as usize, rb as usize)] += x;
                g[(rb as usize, ra as usize)] += x;
            }
        }
        start = end;
    }
    g
}

/// `S ×₁ X₁ᵀ ×₂ X₂ᵀ ×₃ X₃ᵀ` for a sparse `S`, in `O(|S| r² + n r³)`.
pub(crate) fn sparse_core(
    coords: &[Coord],
    values: &[f64],
    factors: &[Matrix; 3],
) -> Result<DenseTensor3> {
    let [x1, x2, x3] = factors;
    let (r1, r2, r3) = (x1.ncols(), x2.ncols(), x3.ncols());
    let n1 = x1.nrows();
    let mut b1 = Matrix::zeros(n1, r2 * r3);
    for (c, &v) in coords.iter().zip(values) {
        let (i, j, k) = (c[0] as usize, c[1] as usize, c[2] as usize);
        for cc in 0..r3 {
            let s = v * x3[(k, cc)];
            for bb in 0..r2 {
                b1[(i, bb + r2 * cc)] += s * x2[(j, bb)];
            }
        }
    }
    dematricize(&x1.tr_mul(&b1), Mode::One, [r1, r2, r3])
}

/// Spectral initialization at rank `(r, r, r)`.
pub fn spectral_init(
    obs: &SampleSet,
    p: f64,
    r: usize,
    deletion: Deletion,
) -> Result<InitReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling rate {p} outside (0, 1]")));
    }
    let inv = 1.0 / p;
    let scaled: Vec<f64> = obs.values().iter().map(|v| v * inv).collect();
    init_from_weighted(obs.n(), obs.coords(), &scaled, r, deletion)
}

/// Spectral initialization from an arbitrary weighted sparse tensor.
pub(crate) fn init_from_weighted(
    n: usize,
    coords: &[Coord],
    values: &[f64],
    r: usize,
    deletion: Deletion,
) -> Result<InitReport> {
    if coords.is_empty() {
        return Err(Error::InsufficientSamples);
    }
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("rank {r} for dimension {n}")));
    }
    let mut factors: Vec<Matrix> = Vec::with_capacity(3);
    let mut eigenvalues: [Vec<f64>; 3] = Default::default();
    let mut degenerate_gap = [false; 3];
    let mut nonpositive = [false; 3];
    for m in Mode::ALL {
        let mut g = weighted_gram(n, coords, values, m);
        if deletion == Deletion::On {
            g.fill_diagonal(0.0);
        }
        let top = top_r_eigen(&g, r)?;
        let i = m.index();
        nonpositive[i] = top.values.iter().any(|&v| v <= 0.0);
        degenerate_gap[i] = top.degenerate_gap;
        eigenvalues[i] = top.values;
        factors.push(top.vectors);
    }
    let mut it = factors.into_iter();
    let factors = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    let core = sparse_core(coords, values, &factors)?;
    Ok(InitReport {
        form: TuckerForm::new(core, factors)?,
        eigenvalues,
        degenerate_gap,
        nonpositive,
    })
}
