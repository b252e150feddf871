//! Dense three-way tensors: storage, unfoldings, mode products and norms.
//!
//! Entries are stored with the first index fastest,
//! `idx(i₁,i₂,i₃) = i₁ + n₁·i₂ + n₁n₂·i₃` (zero-based), which makes the
//! mode-1 unfolding a plain reshape of the buffer. The unfoldings follow
//! the column orderings
//!
//! ```text
//! M₁(X)[i₁, i₂ + n₂·i₃] = X[i₁,i₂,i₃]
//! M₂(X)[i₂, i₁ + n₁·i₃] = X[i₁,i₂,i₃]
//! M₃(X)[i₃, i₁ + n₁·i₂] = X[i₁,i₂,i₃]
//! ```
//!
//! so that for a Tucker tensor `M₁(G ×₁ A ×₂ B ×₃ C) = A·M₁(G)·(C ⊗ B)ᵀ`.

use nalgebra::{DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One of the three tensor modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based position of the mode.
    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Mode> {
        Mode::ALL.get(i).copied()
    }

    /// The two remaining modes in increasing order.
    pub fn others(self) -> (Mode, Mode) {
        match self {
            Mode::One => (Mode::Two, Mode::Three),
            Mode::Two => (Mode::One, Mode::Three),
            Mode::Three => (Mode::One, Mode::Two),
        }
    }
}

/// Dense `n₁ × n₂ × n₃` real tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        DenseTensor3 {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    /// The all-one tensor.
    pub fn ones(dims: [usize; 3]) -> Self {
        DenseTensor3 {
            dims,
            data: vec![1.0; dims[0] * dims[1] * dims[2]],
        }
    }

    /// Wraps a buffer in linear order, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero dimension in {dims:?}")));
        }
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "{} values for dims {dims:?} (expected {len})",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(DenseTensor3 { dims, data })
    }

    /// Builds a tensor entrywise from zero-based indices.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        DenseTensor3 { dims, data }
    }

    pub(crate) fn from_raw(dims: [usize; 3], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims[0] * dims[1] * dims[2]);
        DenseTensor3 { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dim(&self, mode: Mode) -> usize {
        self.dims[mode.index()]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.linear_index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.linear_index(i, j, k);
        self.data[idx] = v;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn scale(&self, s: f64) -> Self {
        DenseTensor3::from_raw(self.dims, self.data.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same_dims(self, other)?;
        Ok(DenseTensor3::from_raw(
            self.dims,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(‖X‖_F, ‖X‖_∞)`.
    pub fn norms(&self) -> (f64, f64) {
        (self.fro_norm(), self.inf_norm())
    }
}

fn check_same_dims(a: &DenseTensor3, b: &DenseTensor3) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::ShapeMismatch(format!(
            "tensor dims {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    Ok(())
}

/// Entrywise inner product `⟨X, Z⟩`.
pub fn inner(x: &DenseTensor3, z: &DenseTensor3) -> Result<f64> {
    check_same_dims(x, z)?;
    Ok(x.data.iter().zip(&z.data).map(|(a, b)| a * b).sum())
}

/// Rank-one tensor `a ∘ b ∘ c`.
pub fn outer3(a: &[f64], b: &[f64], c: &[f64]) -> DenseTensor3 {
    let dims = [a.len(), b.len(), c.len()];
    DenseTensor3::from_fn(dims, |i, j, k| a[i] * b[j] * c[k])
}

/// Shape `(rows, cols)` of the mode unfolding of a tensor with `dims`.
pub fn unfolding_shape(dims: [usize; 3], mode: Mode) -> (usize, usize) {
    let [n1, n2, n3] = dims;
    match mode {
        Mode::One => (n1, n2 * n3),
        Mode::Two => (n2, n1 * n3),
        Mode::Three => (n3, n1 * n2),
    }
}

/// Mode unfolding `M_mode(X)`.
pub fn matricize(x: &DenseTensor3, mode: Mode) -> Matrix {
    let [n1, n2, n3] = x.dims;
    match mode {
        Mode::One => Matrix::from_column_slice(n1, n2 * n3, &x.data),
        Mode::Two => {
            let mut m = Matrix::zeros(n2, n1 * n3);
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        m[(j, i + n1 * k)] = x.data[i + n1 * (j + n2 * k)];
                    }
                }
            }
            m
        }
        Mode::Three => {
            DMatrixView::from_slice(&x.data, n1 * n2, n3).transpose()
        }
    }
}

/// Inverse of [`matricize`].
pub fn dematricize(m: &Matrix, mode: Mode, dims: [usize; 3]) -> Result<DenseTensor3> {
    let (rows, cols) = unfolding_shape(dims, mode);
    if m.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "unfolding {:?} does not fit dims {dims:?} in mode {mode:?}",
            m.shape()
        )));
    }
    let [n1, n2, n3] = dims;
    let data = match mode {
        Mode::One => m.as_slice().to_vec(),
        Mode::Two => {
            let mut data = vec![0.0; n1 * n2 * n3];
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        data[i + n1 * (j + n2 * k)] = m[(j, i + n1 * k)];
                    }
                }
            }
            data
        }
        Mode::Three => m.transpose().as_slice().to_vec(),
    };
    Ok(DenseTensor3::from_raw(dims, data))
}

/// Mode product `X ×_mode A` with `A` of shape `m × n_mode`.
pub fn mode_product(x: &DenseTensor3, a: &Matrix, mode: Mode) -> Result<DenseTensor3> {
    let n_mode = x.dim(mode);
    if a.ncols() != n_mode {
        return Err(Error::ShapeMismatch(format!(
            "mode {mode:?} product: matrix has {} columns, tensor dimension is {n_mode}",
            a.ncols()
        )));
    }
    Ok(mode_product_unchecked(x, a, mode))
}

pub(crate) fn mode_product_unchecked(x: &DenseTensor3, a: &Matrix, mode: Mode) -> DenseTensor3 {
    let [n1, n2, n3] = x.dims;
    let m = a.nrows();
    let mut dims = x.dims;
    dims[mode.index()] = m;
    let mut out = vec![0.0; dims[0] * dims[1] * dims[2]];
    match mode {
        Mode::One => {
            let src = DMatrixView::from_slice(&x.data, n1, n2 * n3);
            let mut dst = DMatrixViewMut::from_slice(&mut out, m, n2 * n3);
            dst.gemm(1.0, a, &src, 0.0);
        }
        Mode::Two => {
            let at = a.transpose();
            for k in 0..n3 {
                let src = DMatrixView::from_slice(&x.data[n1 * n2 * k..n1 * n2 * (k + 1)], n1, n2);
                let mut dst =
                    DMatrixViewMut::from_slice(&mut out[n1 * m * k..n1 * m * (k + 1)], n1, m);
                dst.gemm(1.0, &src, &at, 0.0);
            }
        }
        Mode::Three => {
            let src = DMatrixView::from_slice(&x.data, n1 * n2, n3);
            let mut dst = DMatrixViewMut::from_slice(&mut out, n1 * n2, m);
            dst.gemm(1.0, &src, &a.transpose(), 0.0);
        }
    }
    DenseTensor3::from_raw(dims, out)
}

/// `X ×₁ A₁ ×₂ A₂ ×₃ A₃`.
pub fn multi_mode_product(x: &DenseTensor3, mats: [&Matrix; 3]) -> Result<DenseTensor3> {
    let y = mode_product(x, mats[0], Mode::One)?;
    let y = mode_product(&y, mats[1], Mode::Two)?;
    mode_product(&y, mats[2], Mode::Three)
}

/// Gram matrix `M_mode(X)·M_mode(X)ᵀ` computed without forming the unfolding
/// for modes 2 and 3.
pub fn mode_gram(x: &DenseTensor3, mode: Mode) -> Matrix {
    let [n1, n2, n3] = x.dims;
    match mode {
        Mode::One => {
            let v = DMatrixView::from_slice(&x.data, n1, n2 * n3);
            v * v.transpose()
        }
        Mode::Two => {
            let mut g = Matrix::zeros(n2, n2);
            for k in 0..n3 {
                let s = DMatrixView::from_slice(&x.data[n1 * n2 * k..n1 * n2 * (k + 1)], n1, n2);
                g.gemm_tr(1.0, &s, &s, 1.0);
            }
            g
        }
        Mode::Three => {
            let v = DMatrixView::from_slice(&x.data, n1 * n2, n3);
            v.tr_mul(&v)
        }
    }
}

/// Singular values of `M_mode(X)` in descending order, from the eigenvalues
/// of the mode Gram matrix.
pub fn mode_singular_values(x: &DenseTensor3, mode: Mode) -> Vec<f64> {
    gram_singular_values(&mode_gram(x, mode))
}

pub(crate) fn gram_singular_values(gram: &Matrix) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new((gram + gram.transpose()) * 0.5);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    vals
}

/// Relative threshold below which the r-th singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// `(σ_max, σ_min)` over the three unfoldings, where `σ_min` is the r-th
/// singular value of each unfolding.
pub fn sigma_extremes(x: &DenseTensor3, r: usize) -> Result<(f64, f64)> {
    let per_mode: Vec<Vec<f64>> = Mode::ALL.iter().map(|&m| mode_singular_values(x, m)).collect();
    extremes_from_spectra(&per_mode, r)
}

pub(crate) fn extremes_from_spectra(spectra: &[Vec<f64>], r: usize) -> Result<(f64, f64)> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be positive".into()));
    }
    let mut smax = 0.0f64;
    let mut smin = f64::INFINITY;
    for s in spectra {
        let s1 = s.first().copied().unwrap_or(0.0);
        let sr = s.get(r - 1).copied().unwrap_or(0.0);
        if s1 == 0.0 || sr < RANK_TOLERANCE * s1 {
            return Err(Error::DegenerateRank {
                rank: r,
                sigma_r: sr,
                sigma_1: s1,
            });
        }
        smax = smax.max(s1);
        smin = smin.min(sr);
    }
    Ok((smax, smin))
}

/// Kronecker product, re-exported here because the unfolding identities are
/// phrased with it.
pub use crate::linalg::kron;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: [usize; 3], seed: u64) -> DenseTensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Entrywise mode product straight from the defining sum.
    fn naive_mode_product(x: &DenseTensor3, a: &Matrix, mode: Mode) -> DenseTensor3 {
        let mut dims = x.dims();
        dims[mode.index()] = a.nrows();
        DenseTensor3::from_fn(dims, |j1, j2, j3| {
            let mut s = 0.0;
            for t in 0..x.dim(mode) {
                let (i, j, k, row) = match mode {
                    Mode::One => (t, j2, j3, j1),
                    Mode::Two => (j1, t, j3, j2),
                    Mode::Three => (j1, j2, t, j3),
                };
                s += x.get(i, j, k) * a[(row, t)];
            }
            s
        })
    }

    #[test]
    fn matricize_enumerated_2x2x2() {
        // values 1..8 placed at i1 + 2 i2 + 4 i3 + 1
        let x = DenseTensor3::from_fn([2, 2, 2], |i, j, k| (1 + i + 2 * j + 4 * k) as f64);
        let m1 = matricize(&x, Mode::One);
        assert_eq!(m1.row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(m1.row(1).iter().cloned().collect::<Vec<_>>(), vec![2.0, 4.0, 6.0, 8.0]);
        let back = dematricize(&m1, Mode::One, [2, 2, 2]).unwrap();
        assert_eq!(back, x);
        // M2[i2, i1 + 2 i3]
        let m2 = matricize(&x, Mode::Two);
        assert_eq!(m2.row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 2.0, 5.0, 6.0]);
        // M3[i3, i1 + 2 i2]
        let m3 = matricize(&x, Mode::Three);
        assert_eq!(m3.row(1).iter().cloned().collect::<Vec<_>>(), vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn degenerate_1x1x1() {
        let x = DenseTensor3::from_vec([1, 1, 1], vec![5.0]).unwrap();
        for m in Mode::ALL {
            assert_eq!(matricize(&x, m), Matrix::from_element(1, 1, 5.0));
        }
    }

    #[test]
    fn zero_matrix_dematricizes_to_zero() {
        let z = Matrix::zeros(3, 8);
        let t = dematricize(&z, Mode::Two, [2, 3, 4]).unwrap();
        assert_eq!(t, DenseTensor3::zeros([2, 3, 4]));
        assert!(dematricize(&z, Mode::One, [2, 3, 4]).is_err());
    }

    #[test]
    fn rank_one_unfolding_is_kron() {
        let a = [1.0, -2.0];
        let b = [0.5, 1.0, 3.0];
        let c = [2.0, -1.0];
        let x = outer3(&a, &b, &c);
        let av = Matrix::from_column_slice(2, 1, &a);
        let bv = Matrix::from_column_slice(3, 1, &b);
        let cv = Matrix::from_column_slice(2, 1, &c);
        assert_eq!(matricize(&x, Mode::One), &av * kron(&cv, &bv).transpose());
        assert_eq!(matricize(&x, Mode::Two), &bv * kron(&cv, &av).transpose());
        assert_eq!(matricize(&x, Mode::Three), &cv * kron(&bv, &av).transpose());
    }

    #[test]
    fn outer_examples() {
        let e = outer3(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(e.get(0, 0, 0), 1.0);
        assert_eq!(e.fro_norm(), 1.0);
        assert_eq!(outer3(&[0.0, 0.0], &[1.0, 2.0], &[3.0, 4.0]).inf_norm(), 0.0);
        let s = outer3(&[1.0, 2.0], &[1.0, 1.0], &[1.0, -1.0]);
        assert_eq!(s.get(1, 0, 1), -2.0);
        assert_eq!(s.get(0, 1, 0), 1.0);
        assert_eq!(s.get(1, 1, 0), 2.0);
        assert_eq!(s.get(0, 0, 1), -1.0);
    }

    #[test]
    fn mode_product_identity_and_hand_sum() {
        let x = random_tensor([3, 4, 2], 1);
        for m in Mode::ALL {
            let id = Matrix::identity(x.dim(m), x.dim(m));
            assert_eq!(mode_product(&x, &id, m).unwrap(), x);
        }
        let ones = DenseTensor3::ones([2, 2, 2]);
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let y = mode_product(&ones, &a, Mode::One).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!((y.get(0, j, k), y.get(1, j, k)), (3.0, 7.0));
            }
        }
        assert!(mode_product(&x, &a, Mode::One).is_err());
    }

    #[test]
    fn mode_product_matches_definition() {
        let x = random_tensor([3, 4, 5], 2);
        for m in Mode::ALL {
            let a = random_matrix(2, x.dim(m), 3 + m.index() as u64);
            let fast = mode_product(&x, &a, m).unwrap();
            let slow = naive_mode_product(&x, &a, m);
            assert!(fast.sub(&slow).unwrap().fro_norm() < 1e-13);
            // also matches the unfolding route
            let via = dematricize(&(&a * matricize(&x, m)), m, fast.dims()).unwrap();
            assert!(fast.sub(&via).unwrap().fro_norm() < 1e-13);
        }
    }

    #[test]
    fn mode_products_commute_and_compose() {
        let x = random_tensor([5, 5, 5], 4);
        let a = random_matrix(5, 5, 5);
        let b = random_matrix(5, 5, 6);
        let ab = mode_product(&mode_product(&x, &a, Mode::One).unwrap(), &b, Mode::Two).unwrap();
        let ba = mode_product(&mode_product(&x, &b, Mode::Two).unwrap(), &a, Mode::One).unwrap();
        assert!(ab.sub(&ba).unwrap().fro_norm() <= 1e-12 * ab.fro_norm());
        // X ×₃ A ×₃ B = X ×₃ (BA)
        let seq = mode_product(&mode_product(&x, &a, Mode::Three).unwrap(), &b, Mode::Three).unwrap();
        let once = mode_product(&x, &(&b * &a), Mode::Three).unwrap();
        assert!(seq.sub(&once).unwrap().fro_norm() <= 1e-12 * seq.fro_norm());
    }

    #[test]
    fn fro_norm_invariant_under_orthonormal_products() {
        let x = random_tensor([5, 5, 5], 7);
        let q = crate::linalg::thin_qr(&random_matrix(8, 5, 8)).0;
        let y = multi_mode_product(&x, [&q, &q, &q]).unwrap();
        assert!((y.fro_norm() - x.fro_norm()).abs() <= 1e-12 * x.fro_norm());
    }

    #[test]
    fn norms_examples() {
        assert_eq!(DenseTensor3::zeros([2, 2, 2]).norms(), (0.0, 0.0));
        let e = outer3(&[2.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(e.norms(), (2.0, 2.0));
        let x = random_tensor([4, 4, 4], 9);
        let direct: f64 = x.as_slice().iter().map(|v| v * v).sum();
        assert!((inner(&x, &x).unwrap() - direct).abs() < 1e-13);
        assert!((x.fro_norm().powi(2) - direct).abs() < 1e-12);
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(matches!(
            DenseTensor3::from_vec([1, 1, 2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(DenseTensor3::from_vec([2, 2, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn mode_gram_matches_unfolding() {
        let x = random_tensor([3, 4, 5], 10);
        for m in Mode::ALL {
            let u = matricize(&x, m);
            let g = &u * u.transpose();
            assert!((mode_gram(&x, m) - g).norm() < 1e-12);
        }
    }

    #[test]
    fn sigma_extremes_examples() {
        let s = 0.6f64;
        let c = 0.8f64;
        let x = outer3(&[s, c], &[c, -s], &[1.0, 0.0]).scale(2.0);
        let (hi, lo) = sigma_extremes(&x, 1).unwrap();
        assert!((hi - 2.0).abs() < 1e-12 && (lo - 2.0).abs() < 1e-12);

        // core diag(3, 1) on the superdiagonal G[0,0,0]=3, G[1,1,1]=1
        let g = DenseTensor3::from_fn([2, 2, 2], |i, j, k| {
            if i == j && j == k {
                [3.0, 1.0][i]
            } else {
                0.0
            }
        });
        let (hi, lo) = sigma_extremes(&g, 2).unwrap();
        assert!((hi - 3.0).abs() < 1e-12 && (lo - 1.0).abs() < 1e-12);
        assert!((hi / lo - 3.0).abs() < 1e-12);

        assert!(matches!(
            sigma_extremes(&DenseTensor3::zeros([2, 2, 2]), 1),
            Err(Error::DegenerateRank { .. })
        ));
    }

    #[test]
    fn kron_identities() {
        let a = random_matrix(2, 3, 11);
        let b = random_matrix(3, 2, 12);
        let k = kron(&a, &b);
        assert!((k.norm() - a.norm() * b.norm()).abs() < 1e-12);
        assert!((kron(&a.transpose(), &b.transpose()) - k.transpose()).norm() < 1e-14);
        let two_inf = crate::linalg::two_inf_norm;
        assert!((two_inf(&k) - two_inf(&a) * two_inf(&b)).abs() < 1e-12);
        let spec = crate::linalg::spectral_norm;
        assert!((spec(&k) - spec(&a) * spec(&b)).abs() < 1e-12);

        let a = random_matrix(2, 2, 13);
        let b = random_matrix(2, 2, 14);
        let c = random_matrix(2, 2, 15);
        let d = random_matrix(2, 2, 16);
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!((lhs - rhs).norm() < 1e-13);
    }

    proptest! {
        #[test]
        fn matricize_roundtrip_bit_exact(
            n1 in 1usize..5, n2 in 1usize..5, n3 in 1usize..5, seed in any::<u64>()
        ) {
            let x = random_tensor([n1, n2, n3], seed);
            for m in Mode::ALL {
                let mat = matricize(&x, m);
                let back = dematricize(&mat, m, x.dims()).unwrap();
                prop_assert_eq!(&back, &x);
                prop_assert_eq!(matricize(&back, m), mat);
            }
        }
    }
}
