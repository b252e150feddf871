//! Tangent spaces of the fixed-multilinear-rank manifold and the Riemannian
//! gradient iteration
//!
//! ```text
//! X⁺ = H_r( X − p⁻¹·P_{T_X} P_Ω(X − T) )
//! ```
//!
//! with unit step size. A tangent vector at `X = G ×ᵢ Xᵢ` is stored as a
//! core perturbation `C` and three blocks `Wᵢ ⊥ Xᵢ`, representing
//! `C ×ᵢ Xᵢ + Σᵢ G ×ᵢ Wᵢ ×_{j≠i} Xⱼ`. The projection of `Z` is
//!
//! ```text
//! C  = Z ×₁ X₁ᵀ ×₂ X₂ᵀ ×₃ X₃ᵀ
//! Wᵢ = (I − XᵢXᵢᵀ)·Mᵢ(Z ×_{j≠i} Xⱼᵀ)·Mᵢ(G)†
//! ```
//!
//! When `Z` is sparse the contractions `Z ×_{j≠i} Xⱼᵀ` are accumulated entry by
//! entry in `O(|Ω| r²)`, and the update `X − P_T(Z)` has width at most `2r`
//! per mode, so the retraction runs on a `2r × 2r × 2r` core.

use std::sync::{Arc, RwLock};
use std::time::Instant;

use crate::decomposition::{
    compact_hosvd_detailed, hosvd_detailed, CompactForm, Retraction, TuckerForm,
};
use crate::error::{Error, Result};
use crate::linalg::{svd, thin_qr, Matrix};
use crate::sampling::{sparse_residual, SampleSet};
use crate::tensor::{
    dematricize, matricize, mode_product_unchecked, DenseTensor3, Mode, RANK_TOLERANCE,
};
use crate::verification::{metrics, Reference};

/// Element of the tangent space at a Tucker point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    /// Core perturbation `C`.
    pub core: DenseTensor3,
    /// Factor perturbations `Wᵢ`, orthogonal to the anchor factors.
    pub w: [Matrix; 3],
}

impl TangentVector {
    /// `sqrt(‖C‖² + Σᵢ‖Wᵢ‖²)`, a scale for relative comparisons.
    pub fn coefficient_norm(&self) -> f64 {
        let c = self.core.fro_norm().powi(2);
        let w: f64 = self.w.iter().map(|m| m.norm_squared()).sum();
        (c + w).sqrt()
    }
}

/// Which HOSVD implementation the iteration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RetractionPath {
    /// Compact `2r`-width retraction, never forming a dense tensor.
    #[default]
    Structured,
    /// Dense pre-retraction tensor and full HOSVD; a reference path.
    Dense,
}

/// Iteration settings.
#[derive(Debug, Clone)]
pub struct RgmConfig {
    pub rank: usize,
    /// Sampling rate used for the `p⁻¹` scaling.
    pub p: f64,
    /// Maximum number of updates.
    pub max_iters: usize,
    /// Stop once `‖P_Ω(X − T)‖_F / ‖P_Ω(T)‖_F` falls to this level.
    pub tol_rel_residual: f64,
    pub retraction_path: RetractionPath,
    /// Record ground-truth metrics when a reference is supplied.
    pub trace_metrics: bool,
}

impl RgmConfig {
    pub fn new(rank: usize, p: f64) -> Self {
        RgmConfig {
            rank,
            p,
            max_iters: 200,
            tol_rel_residual: 1e-12,
            retraction_path: RetractionPath::Structured,
            trace_metrics: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidArgument(format!("sampling rate {} outside (0, 1]", self.p)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol_rel_residual >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {}", self.tol_rel_residual)));
        }
        Ok(())
    }
}

/// Moore–Penrose pseudoinverse of `M_mode(G)`.
///
/// The tangent projection needs `M_mode(G)` of full row rank, so a singular
/// value below `1e-12·σ_max` is reported as [`Error::DegenerateCore`].
pub fn core_pinv(g: &DenseTensor3, mode: Mode) -> Result<Matrix> {
    let m = matricize(g, mode);
    let rows = m.nrows();
    let d = svd(&m);
    let smax = d.sigma.first().copied().unwrap_or(0.0);
    if d.sigma.len() < rows || smax == 0.0 || d.sigma.iter().any(|&s| s < RANK_TOLERANCE * smax) {
        return Err(Error::DegenerateCore {
            mode: mode.index() + 1,
            sigmas: d.sigma,
        });
    }
    let inv = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        rows,
        d.sigma.iter().map(|s| 1.0 / s),
    ));
    Ok(d.v * inv * d.u.transpose())
}

/// Input of the tangent projection.
#[derive(Debug, Clone, Copy)]
pub enum Ambient<'a> {
    Dense(&'a DenseTensor3),
    Sparse(&'a SampleSet),
}

/// Orthogonal projection of `Z` onto the tangent space at `point`.
pub fn tangent_project(point: &TuckerForm, z: Ambient<'_>) -> Result<TangentVector> {
    let ranks = point.ranks();
    let dims = point.dims();
    let contracted = match z {
        Ambient::Dense(t) => {
            if t.dims() != dims {
                return Err(Error::ShapeMismatch(format!(
                    "tensor dims {:?} vs point dims {dims:?}",
                    t.dims()
                )));
            }
            dense_partial_contractions(point, t)
        }
        Ambient::Sparse(s) => {
            if [s.n(); 3] != dims {
                return Err(Error::ShapeMismatch(format!(
                    "sample dimension {} vs point dims {dims:?}",
                    s.n()
                )));
            }
            sparse_partial_contractions(point, s)
        }
    };
    assemble_tangent(point, contracted, ranks)
}

/// `Mᵢ(Z ×_{j≠i} Xⱼᵀ)` for the three modes, each `nᵢ × (r_j r_k)`.
fn dense_partial_contractions(point: &TuckerForm, z: &DenseTensor3) -> [Matrix; 3] {
    let [x1, x2, x3] = point.factors();
    let (t1, t2, t3) = (x1.transpose(), x2.transpose(), x3.transpose());
    let z3 = mode_product_unchecked(z, &t3, Mode::Three);
    let b1 = mode_product_unchecked(&z3, &t2, Mode::Two);
    let b2 = mode_product_unchecked(&z3, &t1, Mode::One);
    let z2 = mode_product_unchecked(z, &t2, Mode::Two);
    let b3 = mode_product_unchecked(&z2, &t1, Mode::One);
    [
        matricize(&b1, Mode::One),
        matricize(&b2, Mode::Two),
        matricize(&b3, Mode::Three),
    ]
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Sparse sweep accumulating the three partial contractions at once.
fn sparse_partial_contractions(point: &TuckerForm, z: &SampleSet) -> [Matrix; 3] {
    let [r1, r2, r3] = point.ranks();
    let [n1, n2, n3] = point.dims();
    let [x1, x2, x3] = point.factors();
    let (f1, f2, f3) = (row_major(x1), row_major(x2), row_major(x3));
    let mut b1 = vec![0.0; n1 * r2 * r3];
    let mut b2 = vec![0.0; n2 * r1 * r3];
    let mut b3 = vec![0.0; n3 * r1 * r2];
    for (c, &v) in z.coords().iter().zip(z.values()) {
        let (i, j, k) = (c[0] as usize, c[1] as usize, c[2] as usize);
        let u1 = &f1[i * r1..(i + 1) * r1];
        let u2 = &f2[j * r2..(j + 1) * r2];
        let u3 = &f3[k * r3..(k + 1) * r3];
        let row1 = &mut b1[i * r2 * r3..(i + 1) * r2 * r3];
        for (cc, &w3) in u3.iter().enumerate() {
            let s = v * w3;
            for (b, &w2) in u2.iter().enumerate() {
                row1[b + r2 * cc] += s * w2;
            }
        }
        let row2 = &mut b2[j * r1 * r3..(j + 1) * r1 * r3];
        for (cc, &w3) in u3.iter().enumerate() {
            let s = v * w3;
            for (a, &w1) in u1.iter().enumerate() {
                row2[a + r1 * cc] += s * w1;
            }
        }
        let row3 = &mut b3[k * r1 * r2..(k + 1) * r1 * r2];
        for (b, &w2) in u2.iter().enumerate() {
            let s = v * w2;
            for (a, &w1) in u1.iter().enumerate() {
                row3[a + r1 * b] += s * w1;
            }
        }
    }
    [
        Matrix::from_row_slice(n1, r2 * r3, &b1),
        Matrix::from_row_slice(n2, r1 * r3, &b2),
        Matrix::from_row_slice(n3, r1 * r2, &b3),
    ]
}

fn assemble_tangent(
    point: &TuckerForm,
    contracted: [Matrix; 3],
    ranks: [usize; 3],
) -> Result<TangentVector> {
    let factors = point.factors();
    // C = Z ×ᵢ Xᵢᵀ, read off the mode-1 contraction.
    let c1 = factors[0].tr_mul(&contracted[0]);
    let core = dematricize(&c1, Mode::One, ranks)?;
    let mut w: Vec<Matrix> = Vec::with_capacity(3);
    for (m, b) in Mode::ALL.into_iter().zip(contracted) {
        let x = &factors[m.index()];
        let pinv = core_pinv(point.core(), m)?;
        let perp = &b - x * x.tr_mul(&b);
        let mut wi = perp * pinv;
        // one re-orthogonalization pass against the anchor factor
        let drift = x.tr_mul(&wi);
        wi -= x * drift;
        w.push(wi);
    }
    let mut it = w.into_iter();
    Ok(TangentVector {
        core,
        w: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    })
}

/// Dense tangent vector `C ×ᵢ Xᵢ + Σᵢ G ×ᵢ Wᵢ ×_{j≠i} Xⱼ`.
pub fn tangent_to_full(point: &TuckerForm, v: &TangentVector) -> DenseTensor3 {
    let f = point.factors();
    let g = point.core();
    let expand = |core: &DenseTensor3, a: &Matrix, b: &Matrix, c: &Matrix| {
        let y = mode_product_unchecked(core, a, Mode::One);
        let y = mode_product_unchecked(&y, b, Mode::Two);
        mode_product_unchecked(&y, c, Mode::Three)
    };
    let mut out = expand(&v.core, &f[0], &f[1], &f[2]);
    let terms = [
        expand(g, &v.w[0], &f[1], &f[2]),
        expand(g, &f[0], &v.w[1], &f[2]),
        expand(g, &f[0], &f[1], &v.w[2]),
    ];
    for t in &terms {
        for (o, x) in out.data_mut().iter_mut().zip(t.as_slice()) {
            *o += x;
        }
    }
    out
}

/// Compact form of `offset − v`, where `offset` shares the anchor factors of
/// `point`.
///
/// In the stacked bases `[Xᵢ | Wᵢ]` the difference has the `2r`-wide core
///
/// ```text
/// [G_off − C  −G ]   (mode-1 blocks; likewise −G in the W-block of
/// [  −G        0 ]    each other mode, zero elsewhere)
/// ```
///
/// and a thin QR of each stacked basis turns it into orthonormal factors.
pub fn tangent_to_compact(
    point: &TuckerForm,
    v: &TangentVector,
    offset: &TuckerForm,
) -> Result<CompactForm> {
    for m in Mode::ALL {
        let d = (offset.factor(m) - point.factor(m)).norm();
        if !(d <= 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "offset is not anchored at the point's factors (mode {:?} differs by {d:e})",
                m
            )));
        }
    }
    let [r1, r2, r3] = point.ranks();
    let g = point.core();
    let g_off = offset.core();
    let wide = [2 * r1, 2 * r2, 2 * r3];
    let mut k0 = DenseTensor3::zeros(wide);
    for c in 0..r3 {
        for b in 0..r2 {
            for a in 0..r1 {
                let gv = g.get(a, b, c);
                k0.set(a, b, c, g_off.get(a, b, c) - v.core.get(a, b, c));
                k0.set(a + r1, b, c, -gv);
                k0.set(a, b + r2, c, -gv);
                k0.set(a, b, c + r3, -gv);
            }
        }
    }
    let mut qs: Vec<Matrix> = Vec::with_capacity(3);
    let mut core = k0;
    for m in Mode::ALL {
        let x = point.factor(m);
        let w = &v.w[m.index()];
        let n = x.nrows();
        let r = x.ncols();
        let mut stacked = Matrix::zeros(n, 2 * r);
        stacked.columns_mut(0, r).copy_from(x);
        stacked.columns_mut(r, r).copy_from(w);
        let (q, rr) = thin_qr(&stacked);
        core = mode_product_unchecked(&core, &rr, m);
        qs.push(q);
    }
    let mut it = qs.into_iter();
    CompactForm::new(core, [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

/// Retraction of `x − v` along the configured path.
pub(crate) fn retract(
    x: &TuckerForm,
    v: &TangentVector,
    rank: usize,
    path: RetractionPath,
) -> Result<Retraction> {
    match path {
        RetractionPath::Structured => {
            let compact = tangent_to_compact(x, v, x)?;
            compact_hosvd_detailed(&compact, rank)
        }
        RetractionPath::Dense => {
            let pre = x.to_full().sub(&tangent_to_full(x, v))?;
            hosvd_detailed(&pre, rank)
        }
    }
}

/// One update from an already weighted sparse gradient `w ⊙ P_Ω(X − T)`.
pub(crate) fn step_from_gradient(
    x: &TuckerForm,
    gradient: &SampleSet,
    rank: usize,
    path: RetractionPath,
) -> Result<Retraction> {
    let v = tangent_project(x, Ambient::Sparse(gradient))?;
    retract(x, &v, rank, path)
}

/// One Riemannian gradient update.
pub fn rgm_step(x: &TuckerForm, obs: &SampleSet, cfg: &RgmConfig) -> Result<TuckerForm> {
    rgm_step_detailed(x, obs, cfg).map(|r| r.form)
}

pub fn rgm_step_detailed(x: &TuckerForm, obs: &SampleSet, cfg: &RgmConfig) -> Result<Retraction> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::InsufficientSamples);
    }
    let inv_p = 1.0 / cfg.p;
    let grad = sparse_residual(x, obs)?.map_values(|r| r * inv_p);
    step_from_gradient(x, &grad, cfg.rank, cfg.retraction_path)
}

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Iterate index, starting at 1 for the initial point.
    pub iter: usize,
    pub rel_res_obs: f64,
    pub rel_fro: Option<f64>,
    pub rel_inf: Option<f64>,
    pub rel_2inf: Option<[f64; 3]>,
    /// Wall time since the start of the run.
    pub seconds: f64,
    /// Some unfolding had tied `σ_r, σ_{r+1}` in the retraction producing
    /// this iterate.
    pub degenerate_gap: bool,
}

/// CSV header of a run trace.
pub const TRACE_CSV_HEADER: &str =
    "iter,rel_res_obs,rel_fro,rel_inf,rel_2inf_m1,rel_2inf_m2,rel_2inf_m3,seconds";

impl TraceRecord {
    /// CSV row; ground-truth columns are empty when absent, and so is the
    /// timing column when `timing` is off.
    pub fn to_csv_row(&self, timing: bool) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let [m1, m2, m3] = match self.rel_2inf {
            Some(a) => a.map(|x| format!("{x:e}")),
            None => [String::new(), String::new(), String::new()],
        };
        let secs = if timing {
            format!("{:.6}", self.seconds)
        } else {
            String::new()
        };
        format!(
            "{},{:e},{},{},{},{},{},{}",
            self.iter,
            self.rel_res_obs,
            opt(self.rel_fro),
            opt(self.rel_inf),
            m1,
            m2,
            m3,
            secs
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// Relative observed residual reached the tolerance.
    Converged,
    MaxIters,
    /// A step failed; the message names the error.
    Failed(String),
}

/// Output of [`run_rgm`].
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
    /// Last successfully computed iterate.
    pub final_iterate: TuckerForm,
}

impl RunTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace holds at least the initial record")
    }

    pub fn to_csv(&self, timing: bool) -> String {
        let mut s = String::from(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.to_csv_row(timing));
            s.push('\n');
        }
        s
    }
}

/// Trace buffer that a reader may poll while the iteration appends to it.
#[derive(Debug, Clone, Default)]
pub struct SharedTrace(Arc<RwLock<Vec<TraceRecord>>>);

impl SharedTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, rec: TraceRecord) {
        self.0.write().expect("trace lock poisoned").push(rec);
    }

    pub fn snapshot(&self) -> Vec<TraceRecord> {
        self.0.read().expect("trace lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.0.read().expect("trace lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runs the iteration from `init` until convergence or `max_iters` updates.
pub fn run_rgm(
    init: &TuckerForm,
    obs: &SampleSet,
    cfg: &RgmConfig,
    reference: Option<&Reference>,
) -> Result<RunTrace> {
    run_rgm_observed(init, obs, cfg, reference, &mut |_| {})
}

/// [`run_rgm`] with a callback invoked on every completed record.
pub fn run_rgm_observed(
    init: &TuckerForm,
    obs: &SampleSet,
    cfg: &RgmConfig,
    reference: Option<&Reference>,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<RunTrace> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::InsufficientSamples);
    }
    let start = Instant::now();
    let obs_norm = obs.norm();
    let denom = if obs_norm > 0.0 { obs_norm } else { 1.0 };
    let inv_p = 1.0 / cfg.p;

    let mut records = Vec::new();
    let mut x = init.clone();
    let mut degenerate_gap = false;
    let mut iter = 1usize;
    let stop = loop {
        let residual = match sparse_residual(&x, obs) {
            Ok(r) => r,
            Err(e) => break StopReason::Failed(format!("{}: {e}", e.variant())),
        };
        let rel_res = residual.norm() / denom;
        let (rel_fro, rel_inf, rel_2inf) = match reference.filter(|_| cfg.trace_metrics) {
            Some(reference) => {
                let m = metrics(&x, reference)?;
                (Some(m.rel_fro), Some(m.rel_inf), Some(m.rel_2inf))
            }
            None => (None, None, None),
        };
        let rec = TraceRecord {
            iter,
            rel_res_obs: rel_res,
            rel_fro,
            rel_inf,
            rel_2inf,
            seconds: start.elapsed().as_secs_f64(),
            degenerate_gap,
        };
        observer(&rec);
        records.push(rec);
        if !rel_res.is_finite() {
            break StopReason::Failed("non-finite residual".into());
        }
        if rel_res <= cfg.tol_rel_residual {
            break StopReason::Converged;
        }
        if iter > cfg.max_iters {
            break StopReason::MaxIters;
        }
        let grad = residual.map_values(|r| r * inv_p);
        match step_from_gradient(&x, &grad, cfg.rank, cfg.retraction_path) {
            Ok(next) => {
                degenerate_gap = next.degenerate_gap.iter().any(|&g| g);
                x = next.form;
            }
            Err(e) => break StopReason::Failed(format!("{}: {e}", e.variant())),
        }
        iter += 1;
    };
    Ok(RunTrace {
        records,
        stop,
        final_iterate: x,
    })
}
