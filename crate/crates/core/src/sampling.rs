//! Bernoulli observation model and sparse sampling operators.
//!
//! Coordinates are zero-based `[i₁, i₂, i₃]` triples of `u32`, kept sorted
//! lexicographically. Every sparse sweep in the crate walks them in that
//! order, which pins the floating-point accumulation order.

use crate::decomposition::TuckerForm;
use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, two_inf_norm, Matrix};
use crate::tensor::{matricize, DenseTensor3, Mode};

pub type Coord = [u32; 3];

/// Observed index set `Ω` of an `n × n × n` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    n: usize,
    coords: Vec<Coord>,
    p_nominal: f64,
    /// Generator seed, when the mask was drawn by [`bernoulli_mask`].
    seed: Option<u64>,
}

impl Mask {
    /// Wraps an explicit coordinate list, which must be strictly sorted and
    /// in range.
    pub fn from_coords(
        n: usize,
        coords: Vec<Coord>,
        p_nominal: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        if n == 0 || n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("mask dimension {n}")));
        }
        if !(0.0..=1.0).contains(&p_nominal) {
            return Err(Error::InvalidArgument(format!("sampling rate {p_nominal}")));
        }
        for w in coords.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(format!(
                    "coordinates not strictly sorted at {:?}, {:?}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(c) = coords.iter().find(|c| c.iter().any(|&i| i as usize >= n)) {
            return Err(Error::InvalidArgument(format!("coordinate {c:?} out of range for n = {n}")));
        }
        Ok(Mask {
            n,
            coords,
            p_nominal,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn p_nominal(&self) -> f64 {
        self.p_nominal
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Observed fraction `|Ω| / n³`.
    pub fn density(&self) -> f64 {
        self.coords.len() as f64 / (self.n as f64).powi(3)
    }

    pub fn contains(&self, c: &Coord) -> bool {
        self.coords.binary_search(c).is_ok()
    }

    /// Dense 0/1 indicator tensor.
    pub fn indicator(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros([self.n; 3]);
        for c in &self.coords {
            t.set(c[0] as usize, c[1] as usize, c[2] as usize, 1.0);
        }
        t
    }
}

/// SplitMix64 finalizer.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` keyed by `(seed, linear index)`.
#[inline]
fn keyed_uniform(seed_key: u64, linear: u64) -> f64 {
    (splitmix64(seed_key ^ linear) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws `Ω` under the Bernoulli model: each entry independently with
/// probability `p`.
///
/// The draw for an entry depends only on `(seed, linear index)`, so the mask
/// does not depend on traversal order.
pub fn bernoulli_mask(n: usize, p: f64, seed: u64) -> Result<Mask> {
    if n == 0 || n > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!("mask dimension {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("sampling rate {p}")));
    }
    let key = splitmix64(seed);
    let nn = n as u64;
    let mut coords = Vec::with_capacity(((n as f64).powi(3) * p * 1.05) as usize + 16);
    for i in 0..nn {
        for j in 0..nn {
            for k in 0..nn {
                let linear = i + nn * (j + nn * k);
                if keyed_uniform(key, linear) < p {
                    coords.push([i as u32, j as u32, k as u32]);
                }
            }
        }
    }
    Ok(Mask {
        n,
        coords,
        p_nominal: p,
        seed: Some(seed),
    })
}

/// Values of a tensor on `Ω`, i.e. `P_Ω(T)` in coordinate form.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    mask: Mask,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(mask: Mask, values: Vec<f64>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} coordinates",
                values.len(),
                mask.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(SampleSet { mask, values })
    }


    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn coords(&self) -> &[Coord] {
        &self.mask.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.mask.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Euclidean norm of the observed values.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same coordinates, values mapped entrywise.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SampleSet {
        SampleSet {
            mask: self.mask.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Dense tensor equal to the samples on `Ω` and zero elsewhere.
    pub fn densify(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros([self.mask.n; 3]);
        for (c, &v) in self.mask.coords.iter().zip(&self.values) {
            t.set(c[0] as usize, c[1] as usize, c[2] as usize, v);
        }
        t
    }
}

fn check_cubic(dims: [usize; 3], n: usize) -> Result<()> {
    if dims != [n; 3] {
        return Err(Error::ShapeMismatch(format!(
            "tensor dims {dims:?} vs mask dimension {n}"
        )));
    }
    Ok(())
}

/// `P_Ω(T)`.
pub fn observe(t: &DenseTensor3, mask: &Mask) -> Result<SampleSet> {
    check_cubic(t.dims(), mask.n)?;
    let values = mask
        .coords
        .iter()
        .map(|c| t.get(c[0] as usize, c[1] as usize, c[2] as usize))
        .collect();
    Ok(SampleSet {
        mask: mask.clone(),
        values,
    })
}

/// Evaluates a Tucker tensor at a sorted coordinate list.
///
/// Each mode-1 row is first contracted against the core (`O(n r³)`), after
/// which every coordinate costs `O(r²)`.
pub fn evaluate_at(x: &TuckerForm, coords: &[Coord]) -> Vec<f64> {
    let [r1, r2, r3] = x.ranks();
    let [x1, x2, x3] = x.factors();
    let g = x.core().as_slice();
    let n1 = x1.nrows();
    // rows[i][b + r2 c] = Σ_a G[a,b,c] X1[i,a]
    let mut rows = vec![0.0; n1 * r2 * r3];
    for i in 0..n1 {
        let dst = &mut rows[i * r2 * r3..(i + 1) * r2 * r3];
        for (bc, d) in dst.iter_mut().enumerate() {
            let base = r1 * bc;
            let mut s = 0.0;
            for a in 0..r1 {
                s += g[base + a] * x1[(i, a)];
            }
            *d = s;
        }
    }
    let mut out = Vec::with_capacity(coords.len());
    let mut w2 = vec![0.0; r2];
    for c in coords {
        let (i, j, k) = (c[0] as usize, c[1] as usize, c[2] as usize);
        let row = &rows[i * r2 * r3..(i + 1) * r2 * r3];
        for (b, w) in w2.iter_mut().enumerate() {
            *w = x2[(j, b)];
        }
        let mut s = 0.0;
        for cc in 0..r3 {
            let mut t = 0.0;
            for b in 0..r2 {
                t += row[b + r2 * cc] * w2[b];
            }
            s += t * x3[(k, cc)];
        }
        out.push(s);
    }
    out
}

/// `P_Ω(X − T)` from a Tucker iterate and the observed data.
pub fn sparse_residual(x: &TuckerForm, obs: &SampleSet) -> Result<SampleSet> {
    check_cubic(x.dims(), obs.n())?;
    let mut vals = evaluate_at(x, obs.coords());
    for (v, t) in vals.iter_mut().zip(&obs.values) {
        *v -= t;
    }
    Ok(SampleSet {
        mask: obs.mask.clone(),
        values: vals,
    })
}

/// Splits `Ω` around index `ℓ` (zero-based).
///
/// Returns the observed coordinates with no index equal to `ℓ`, and the full
/// deterministic set of `3n² − 3n + 1` coordinates with some index equal to
/// `ℓ`, independent of `Ω`.
pub fn split_mask_slice(mask: &Mask, ell: usize) -> Result<(Mask, Vec<Coord>)> {
    let n = mask.n;
    if ell >= n {
        return Err(Error::InvalidArgument(format!(
            "slice index {ell} out of range for n = {n}"
        )));
    }
    let l = ell as u32;
    let off: Vec<Coord> = mask
        .coords
        .iter()
        .filter(|c| c.iter().all(|&i| i != l))
        .copied()
        .collect();
    let mut slice = Vec::with_capacity(3 * n * n - 3 * n + 1);
    for i in 0..n as u32 {
        for j in 0..n as u32 {
            for k in 0..n as u32 {
                if i == l || j == l || k == l {
                    slice.push([i, j, k]);
                }
            }
        }
    }
    let off_mask = Mask {
        n,
        coords: off,
        p_nominal: mask.p_nominal,
        seed: None,
    };
    Ok((off_mask, slice))
}

/// Incoherence `μ = (n/r)·maxᵢ ‖Uᵢ‖²_{2,∞}` of three orthonormal factors.
pub fn incoherence(factors: &[Matrix; 3]) -> Result<f64> {
    let mut mu = 0.0f64;
    for (i, u) in factors.iter().enumerate() {
        let dev = orthonormality_defect(u);
        if !(dev <= 1e-8) {
            return Err(Error::NotOrthonormal {
                mode: i + 1,
                deviation: dev,
            });
        }
        let (n, r) = u.shape();
        mu = mu.max(n as f64 / r as f64 * two_inf_norm(u).powi(2));
    }
    Ok(mu)
}

/// Measured norms against the incoherence bounds
///
/// ```text
/// ‖Tᵢ‖_{2,∞}  ≤ √(μr/n)·σ_max
/// ‖Tᵢᵀ‖_{2,∞} ≤ (μr/n)·σ_max
/// ‖T‖_∞       ≤ (μr/n)^{3/2}·σ_max
/// ```
#[derive(Debug, Clone)]
pub struct IncoherenceReport {
    pub mu: f64,
    pub sigma_max: f64,
    /// `‖Mᵢ(T)‖_{2,∞}` per mode.
    pub row_norms: [f64; 3],
    /// `‖Mᵢ(T)ᵀ‖_{2,∞}` per mode.
    pub fiber_norms: [f64; 3],
    pub inf_norm: f64,
    pub row_bound: f64,
    pub fiber_bound: f64,
    pub inf_bound: f64,
}

impl IncoherenceReport {
    /// Relative slack allowed for bounds that hold with equality.
    const SLACK: f64 = 1e-10;

    pub fn violations(&self) -> Vec<String> {
        let ok = |m: f64, b: f64| m <= b * (1.0 + Self::SLACK);
        let mut v = Vec::new();
        for i in 0..3 {
            if !ok(self.row_norms[i], self.row_bound) {
                v.push(format!("row norm mode {}: {} > {}", i + 1, self.row_norms[i], self.row_bound));
            }
            if !ok(self.fiber_norms[i], self.fiber_bound) {
                v.push(format!(
                    "fiber norm mode {}: {} > {}",
                    i + 1,
                    self.fiber_norms[i],
                    self.fiber_bound
                ));
            }
        }
        if !ok(self.inf_norm, self.inf_bound) {
            v.push(format!("entry bound: {} > {}", self.inf_norm, self.inf_bound));
        }
        v
    }

    pub fn holds(&self) -> bool {
        self.violations().is_empty()
    }
}

/// Checks the incoherence norm bounds of a ground truth against its exact
/// Tucker decomposition.
pub fn lemma21_check(t_full: &DenseTensor3, truth: &TuckerForm) -> Result<IncoherenceReport> {
    let mu = incoherence(truth.factors())?;
    let sigma_max = Mode::ALL
        .iter()
        .map(|&m| {
            crate::tensor::mode_singular_values(truth.core(), m)
                .first()
                .copied()
                .unwrap_or(0.0)
        })
        .fold(0.0, f64::max);
    let n = t_full.dims()[0] as f64;
    let r = truth.rank() as f64;
    let ratio = mu * r / n;
    let mut row_norms = [0.0; 3];
    let mut fiber_norms = [0.0; 3];
    for m in Mode::ALL {
        let u = matricize(t_full, m);
        row_norms[m.index()] = two_inf_norm(&u);
        fiber_norms[m.index()] = u.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    }
    Ok(IncoherenceReport {
        mu,
        sigma_max,
        row_norms,
        fiber_norms,
        inf_norm: t_full.inf_norm(),
        row_bound: ratio.sqrt() * sigma_max,
        fiber_bound: ratio * sigma_max,
        inf_bound: ratio.powf(1.5) * sigma_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_qr;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_tucker(n: usize, r: usize, seed: u64) -> TuckerForm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |rows, cols| {
            thin_qr(&Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))).0
        };
        let factors = [g(n, r), g(n, r), g(n, r)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xff);
        let core = DenseTensor3::from_fn([r, r, r], |_, _, _| StandardNormal.sample(&mut rng));
        TuckerForm::new(core, factors).unwrap()
    }

    #[test]
    fn mask_extremes() {
        assert_eq!(bernoulli_mask(3, 1.0, 0).unwrap().len(), 27);
        assert!(bernoulli_mask(3, 0.0, 0).unwrap().is_empty());
        assert!(bernoulli_mask(3, 1.5, 0).is_err());
    }

    #[test]
    fn mask_density_and_determinism() {
        let a = bernoulli_mask(30, 0.1, 42).unwrap();
        let b = bernoulli_mask(30, 0.1, 42).unwrap();
        assert_eq!(a, b);
        let frac = a.density();
        assert!((0.08..=0.12).contains(&frac), "{frac}");
        assert!(a.coords().windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, bernoulli_mask(30, 0.1, 43).unwrap());
    }

    #[test]
    fn mask_draw_is_keyed_per_entry() {
        // A larger p keeps every entry accepted at a smaller p.
        let small = bernoulli_mask(8, 0.2, 5).unwrap();
        let large = bernoulli_mask(8, 0.6, 5).unwrap();
        assert!(small.coords().iter().all(|c| large.contains(c)));
    }

    #[test]
    fn observe_full_and_empty() {
        let t = random_tucker(4, 2, 1).to_full();
        let full = observe(&t, &bernoulli_mask(4, 1.0, 0).unwrap()).unwrap();
        assert_eq!(full.len(), 64);
        assert_eq!(full.values()[1], t.get(0, 0, 1));
        assert_eq!(full.densify(), t);
        let empty = observe(&t, &bernoulli_mask(4, 0.0, 0).unwrap()).unwrap();
        assert!(empty.values().is_empty());
    }

    #[test]
    fn observe_matches_indicator_product() {
        let t = random_tucker(6, 2, 2).to_full();
        let mask = bernoulli_mask(6, 0.3, 9).unwrap();
        let ind = mask.indicator();
        let expect = DenseTensor3::from_fn([6; 3], |i, j, k| t.get(i, j, k) * ind.get(i, j, k));
        assert_eq!(observe(&t, &mask).unwrap().densify(), expect);
        let wrong = DenseTensor3::zeros([5; 3]);
        assert!(observe(&wrong, &mask).is_err());
    }

    #[test]
    fn residual_examples() {
        let x = random_tucker(6, 2, 3);
        let t = x.to_full();
        let mask = bernoulli_mask(6, 0.5, 1).unwrap();
        let obs = observe(&t, &mask).unwrap();
        let res = sparse_residual(&x, &obs).unwrap();
        assert!(res.values().iter().all(|v| v.abs() < 1e-13));

        let zero = x.scaled(0.0);
        let res = sparse_residual(&zero, &obs).unwrap();
        for (a, b) in res.values().iter().zip(obs.values()) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn residual_matches_dense() {
        for seed in 0..5 {
            let x = random_tucker(7, 3, 10 + seed);
            let truth = random_tucker(7, 3, 20 + seed).to_full();
            let mask = bernoulli_mask(7, 0.4, seed).unwrap();
            let obs = observe(&truth, &mask).unwrap();
            let res = sparse_residual(&x, &obs).unwrap().densify();
            let ind = mask.indicator();
            let full = x.to_full();
            let expect = DenseTensor3::from_fn([7; 3], |i, j, k| {
                (full.get(i, j, k) - truth.get(i, j, k)) * ind.get(i, j, k)
            });
            assert!(res.sub(&expect).unwrap().inf_norm() <= 1e-12);
        }
    }

    #[test]
    fn split_small_case() {
        let mask = bernoulli_mask(2, 1.0, 0).unwrap();
        let (off, slice) = split_mask_slice(&mask, 0).unwrap();
        assert_eq!(off.coords(), &[[1, 1, 1]]);
        assert_eq!(slice.len(), 7);
        assert!(split_mask_slice(&mask, 2).is_err());
    }

    #[test]
    fn split_without_slice_entries_is_identity() {
        let coords = vec![[0, 0, 0], [0, 1, 1], [1, 0, 1]];
        let mask = Mask::from_coords(3, coords, 0.1, None).unwrap();
        let (off, _) = split_mask_slice(&mask, 2).unwrap();
        assert_eq!(off.coords(), mask.coords());
    }

    #[test]
    fn incoherence_extremes() {
        let n = 6;
        let r = 2;
        let e = Matrix::identity(n, r);
        let mu = incoherence(&[e.clone(), e.clone(), e]).unwrap();
        assert!((mu - n as f64 / r as f64).abs() < 1e-14);

        let s = 1.0 / (4.0f64).sqrt();
        let flat = Matrix::from_column_slice(4, 1, &[s, -s, s, s]);
        let mu = incoherence(&[flat.clone(), flat.clone(), flat]).unwrap();
        assert!((mu - 1.0).abs() < 1e-14);

        let bad = Matrix::from_element(3, 1, 1.0);
        assert!(incoherence(&[bad.clone(), bad.clone(), bad]).is_err());
    }

    #[test]
    fn incoherence_random_in_range() {
        let t = random_tucker(50, 3, 77);
        let mu = incoherence(t.factors()).unwrap();
        // direct row-norm maximum
        let direct = t
            .factors()
            .iter()
            .map(|u| {
                (0..50)
                    .map(|i| (0..3).map(|a| u[(i, a)] * u[(i, a)]).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            * 50.0
            / 3.0;
        assert!((mu - direct).abs() < 1e-12);
        assert!((1.0..=50.0 / 3.0).contains(&mu));
    }

    #[test]
    fn lemma_bounds_tight_for_coordinate_rank_one() {
        let n = 5;
        let e = Matrix::identity(n, 1);
        let core = DenseTensor3::from_vec([1, 1, 1], vec![1.0]).unwrap();
        let truth = TuckerForm::new(core, [e.clone(), e.clone(), e]).unwrap();
        let rep = lemma21_check(&truth.to_full(), &truth).unwrap();
        assert!((rep.mu - n as f64).abs() < 1e-14);
        assert!(rep.holds());
        assert!((rep.row_norms[0] - rep.row_bound).abs() < 1e-14);
        assert!((rep.fiber_norms[1] - rep.fiber_bound).abs() < 1e-14);
        assert!((rep.inf_norm - rep.inf_bound).abs() < 1e-14);
    }

    #[test]
    fn lemma_bounds_hold_on_random() {
        for seed in 0..10 {
            let truth = random_tucker(12, 2, 200 + seed);
            let rep = lemma21_check(&truth.to_full(), &truth).unwrap();
            assert!(rep.holds(), "{:?}", rep.violations());
        }
    }

    proptest! {
        #[test]
        fn split_partitions_mask(seed in any::<u64>(), ell in 0usize..6, p in 0.0f64..1.0) {
            let mask = bernoulli_mask(6, p, seed).unwrap();
            let (off, slice) = split_mask_slice(&mask, ell).unwrap();
            prop_assert_eq!(slice.len(), 3 * 36 - 18 + 1);
            for c in off.coords() {
                prop_assert!(slice.binary_search(c).is_err());
                prop_assert!(mask.contains(c));
            }
            let on_slice = mask.coords().iter().filter(|c| slice.binary_search(c).is_ok()).count();
            prop_assert_eq!(on_slice + off.len(), mask.len());
        }
    }
}
