//! Small dense linear-algebra helpers shared by the tensor and manifold code.

use nalgebra::{DMatrix, SymmetricEigen};

/// Column-major dense real matrix.
pub type Matrix = DMatrix<f64>;

/// For each column, whether its largest-magnitude entry is negative.
///
/// Ties in magnitude go to the lowest row index.
pub fn sign_flips(m: &Matrix) -> Vec<bool> {
    m.column_iter()
        .map(|col| {
            let mut best = 0usize;
            let mut best_abs = -1.0f64;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = i;
                }
            }
            best_abs > 0.0 && col[best] < 0.0
        })
        .collect()
}

/// Flip each column so that its largest-magnitude entry is positive.
pub fn fix_column_signs(m: &mut Matrix) {
    for (c, flip) in sign_flips(m).into_iter().enumerate() {
        if flip {
            m.column_mut(c).neg_mut();
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending
/// algebraic order and eigenvector signs normalized.
pub fn sym_eigen_desc(m: &Matrix) -> (Vec<f64>, Matrix) {
    debug_assert!(m.is_square());
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Matrix::zeros(0, 0));
    }
    // Symmetrize so tiny asymmetries from accumulation do not leak in.
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors);
    (values, vectors)
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_defect(q: &Matrix) -> f64 {
    let g = q.tr_mul(q);
    (g - Matrix::identity(q.ncols(), q.ncols())).norm()
}

/// Largest row 2-norm, `‖M‖_{2,∞}`.
pub fn two_inf_norm(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal matrices with the same number of columns.
///
/// Evaluated as `‖(I − AAᵀ)B‖₂` so that small distances keep full precision.
pub fn subspace_distance(a: &Matrix, b: &Matrix) -> f64 {
    let resid = b - a * a.tr_mul(b);
    spectral_norm(&resid)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() >= m.ncols() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    let eig = SymmetricEigen::new(g);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

/// Kronecker product `A ⊗ B` in the standard block layout.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * br, j * bc), (br, bc));
            block.zip_apply(b, |o, v| *o = s * v);
        }
    }
    out
}

/// Thin QR factorization; `Q` has `min(rows, cols)` orthonormal columns.
pub fn thin_qr(m: &Matrix) -> (Matrix, Matrix) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Thin singular value decomposition `M = U diag(σ) Vᵀ`.
///
/// `σ` is sorted in descending order, `U` is `m × k` and `V` is `n × k` with
/// `k = min(m, n)`, both with orthonormal columns. Columns of `U` belonging
/// to zero singular values are completed to an orthonormal set.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD.
///
/// Used for the small dense problems in this crate (`r × r²` unfoldings of
/// cores, `r × r` alignment matrices). nalgebra's bidiagonal SVD loses all
/// accuracy on rank-deficient inputs, which are exactly the inputs these
/// call sites must classify correctly.
pub fn svd(m: &Matrix) -> Svd {
    if m.nrows() < m.ncols() {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let (rows, k) = m.shape();
    let mut a = m.clone();
    let mut v = Matrix::identity(k, k);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let floor = smax * f64::EPSILON * rows.max(k) as f64;
    let mut u = Matrix::zeros(rows, k);
    let mut vs = Matrix::zeros(k, k);
    let mut sigma = Vec::with_capacity(k);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        vs.set_column(dst, &v.column(src));
        if norms[src] > floor && norms[src] > 0.0 {
            u.set_column(dst, &(a.column(src) / norms[src]));
        } else {
            missing.push(dst);
        }
    }
    complete_basis(&mut u, &missing);
    Svd { u, sigma, v: vs }
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)];
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all other
/// columns, drawing candidates from the standard basis.
fn complete_basis(u: &mut Matrix, missing: &[usize]) {
    let rows = u.nrows();
    let mut filled: Vec<usize> = (0..u.ncols()).filter(|c| !missing.contains(c)).collect();
    let mut candidate = 0;
    for &col in missing {
        while candidate < rows {
            let mut e = nalgebra::DVector::zeros(rows);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let proj = u.column(f).dot(&e);
                    e -= u.column(f) * proj;
                }
            }
            let n = e.norm();
            if n > 1e-8 {
                u.set_column(col, &(e / n));
                filled.push(col);
                break;
            }
        }
    }
}
