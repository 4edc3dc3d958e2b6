//! Estimators of `diam(T ∩ ker Γ)`.
//!
//! Exact answers exist for the cross-polytope (vertex enumeration of the
//! section) and for ellipsoids (an eigenproblem). Everything else gets a lower
//! bound from sampled kernel directions refined by hill climbing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;

use crate::bodies::ConvexBody;
use crate::error::{Error, Result};
use crate::kernels::{kernel_basis, KernelBasis};
use crate::lp::{self, LpOutcome};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::widths::gaussian_vector;

/// Independent hill-climbing chains in [`direction_sampling_diameter`].
pub const RESTARTS: usize = 32;
/// Upper limit on the number of support sets visited by exact enumeration.
pub const ENUMERATION_BUDGET: u64 = 5_000_000;
/// Ellipsoid shapes with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest hill-climbing step, relative to the unit kernel direction.
pub const INITIAL_STEP: f64 = 0.5;
/// Smallest step as a fraction of `INITIAL_STEP`; step scales are log-uniform in between.
pub const MIN_STEP: f64 = 1e-6;
/// Cap on the doublings of an accepted move.
const MAX_EXTENSIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterKind {
    Exact,
    LowerBound,
}

impl DiameterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiameterKind::Exact => "exact",
            DiameterKind::LowerBound => "lower_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterResult<T: Scalar> {
    /// `2‖witness‖₂`.
    pub value: T,
    pub kind: DiameterKind,
    /// A point of `T ∩ ker Γ` at distance `value/2` from the origin.
    pub witness: DVector<T>,
    /// Oracle calls (gauges, null spaces or LPs, depending on the method).
    pub evaluations: usize,
}

impl<T: Scalar> DiameterResult<T> {
    fn zero(n: usize, kind: DiameterKind) -> Self {
        Self {
            value: T::zero(),
            kind,
            witness: DVector::zeros(n),
            evaluations: 0,
        }
    }

    fn from_witness(witness: DVector<T>, kind: DiameterKind, evaluations: usize) -> Self {
        Self {
            value: T::lit(2.0) * witness.norm(),
            kind,
            witness,
            evaluations,
        }
    }
}

/// Radius of `T` along the unit vector `d`, i.e. `1/gauge(d)`.
fn radial<T: Scalar>(body: &ConvexBody<T>, d: &DVector<T>) -> Result<T> {
    let g = body.gauge_unchecked(d)?;
    Ok(if g > T::zero() { T::one() / g } else { T::lit(f64::INFINITY) })
}

struct Chain<T: Scalar> {
    z: DVector<T>,
    radius: T,
    evaluations: usize,
}

/// Lower bound on the section diameter from random kernel directions.
///
/// Draws `n_dirs` Gaussian directions in kernel coordinates, split over
/// [`RESTARTS`] substreams. The best direction of each share then hill-climbs
/// for `refine_iters` steps: a Gaussian perturbation with a log-uniform scale
/// is kept if it lengthens the radial segment, and an accepted move is then
/// repeated with doubled length while it keeps improving.
pub fn direction_sampling_diameter<T: Scalar>(
    body: &ConvexBody<T>,
    kb: &KernelBasis<T>,
    n_dirs: usize,
    refine_iters: usize,
    stream: &RngStream,
) -> Result<DiameterResult<T>> {
    crate::error::check_dim(body.dim(), kb.ambient_dim())?;
    if n_dirs < 1 {
        return Err(Error::input("need at least one direction"));
    }
    let m = kb.dim();
    if m == 0 {
        return Ok(DiameterResult::zero(body.dim(), DiameterKind::LowerBound));
    }
    let chains: Vec<Result<Chain<T>>> = (0..RESTARTS)
        .into_par_iter()
        .map(|c| {
            let share = n_dirs / RESTARTS + usize::from(c < n_dirs % RESTARTS);
            let mut rng = stream.substream(c as u64).rng();
            let mut best: Option<Chain<T>> = None;
            let mut evaluations = 0;
            for _ in 0..share.max(1) {
                let mut z = gaussian_vector::<T, _>(m, &mut rng);
                z.normalize_mut();
                let rad = radial(body, &kb.lift(&z))?;
                evaluations += 1;
                if best.as_ref().is_none_or(|b| rad > b.radius) {
                    best = Some(Chain { z, radius: rad, evaluations: 0 });
                }
            }
            let mut chain = best.expect("at least one direction per chain");
            for _ in 0..refine_iters {
                // log-uniform step scale between INITIAL_STEP and INITIAL_STEP·MIN_STEP
                let u: f64 = rng.random();
                let step = T::lit(INITIAL_STEP * (u * MIN_STEP.ln()).exp());
                let mut cand = &chain.z + gaussian_vector::<T, _>(m, &mut rng) * step;
                let cn = cand.norm();
                if cn == T::zero() {
                    continue;
                }
                cand /= cn;
                let rad = radial(body, &kb.lift(&cand))?;
                evaluations += 1;
                if rad > chain.radius {
                    // follow the successful move while it keeps improving
                    let mut delta = &cand - &chain.z;
                    chain.z = cand;
                    chain.radius = rad;
                    for _ in 0..MAX_EXTENSIONS {
                        delta *= T::lit(2.0);
                        let mut next = &chain.z + &delta;
                        let nn = next.norm();
                        if nn == T::zero() {
                            break;
                        }
                        next /= nn;
                        let r2 = radial(body, &kb.lift(&next))?;
                        evaluations += 1;
                        if r2 > chain.radius {
                            chain.z = next;
                            chain.radius = r2;
                        } else {
                            break;
                        }
                    }
                }
            }
            chain.evaluations = evaluations;
            Ok(chain)
        })
        .collect();
    let mut best: Option<Chain<T>> = None;
    let mut evaluations = 0;
    for c in chains {
        let c = c?;
        evaluations += c.evaluations;
        if best.as_ref().is_none_or(|b| c.radius > b.radius) {
            best = Some(c);
        }
    }
    let best = best.expect("RESTARTS > 0");
    if !best.radius.is_finite() {
        return Err(Error::input("body is unbounded along a kernel direction"));
    }
    let witness = kb.lift(&best.z) * best.radius;
    Ok(DiameterResult::from_witness(witness, DiameterKind::LowerBound, evaluations))
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of support sets visited by [`crosspolytope_section_diameter_exact`].
pub fn enumeration_size(n: usize, k: usize) -> u64 {
    let top = (k + 1).min(n) as u64;
    (1..=top).fold(0u64, |acc, s| acc.saturating_add(binomial(n as u64, s)))
}

/// Exact `diam(B₁ⁿ ∩ ker Γ)` by enumerating the section's extreme points.
///
/// An extreme point of a codimension-`k` section of the cross-polytope lies
/// in the relative interior of a face whose affine hull meets `ker Γ` in a
/// single point, so its support `S` has `|S| ≤ k+1` and `ker Γ_S` is
/// one-dimensional. Every support set of size at most `k+1` is visited; each
/// null direction of `Γ_S` is scaled to unit ℓ₁ norm and its ℓ₂ norm
/// recorded. The convex function `‖·‖₂` peaks at an extreme point, so the
/// largest record is the circumradius. Degenerate supports (null space of
/// dimension > 1) contribute all their basis directions, which are feasible.
pub fn crosspolytope_section_diameter_exact<T: Scalar>(
    gamma: &DMatrix<T>,
    rel_tol: T,
) -> Result<DiameterResult<T>> {
    let (k, n) = gamma.shape();
    if n == 0 {
        return Err(Error::input("matrix must have at least one column"));
    }
    if k == 0 {
        let mut w = DVector::zeros(n);
        w[0] = T::one();
        return Ok(DiameterResult::from_witness(w, DiameterKind::Exact, 0));
    }
    if k >= n && kernel_basis(gamma, rel_tol)?.dim() == 0 {
        return Ok(DiameterResult::zero(n, DiameterKind::Exact));
    }
    let size = enumeration_size(n, k);
    if size > ENUMERATION_BUDGET {
        return Err(Error::Size(format!(
            "exact enumeration needs {size} support sets (n = {n}, k = {k}), budget is {ENUMERATION_BUDGET}"
        )));
    }
    let mut best: Option<(T, DVector<T>)> = None;
    let mut evaluations = 0;
    let mut cols = Vec::with_capacity(k + 1);
    for s in 1..=(k + 1).min(n) {
        let mut idx: Vec<usize> = (0..s).collect();
        loop {
            cols.clear();
            cols.extend(idx.iter().map(|&j| gamma.column(j)));
            let sub = DMatrix::from_columns(&cols);
            let null = kernel_basis(&sub, rel_tol)?;
            evaluations += 1;
            for v in null.basis.column_iter() {
                let l1 = v.iter().fold(T::zero(), |a, x| a + x.abs());
                if l1 == T::zero() {
                    continue;
                }
                let mut x = DVector::zeros(n);
                for (pos, &j) in idx.iter().enumerate() {
                    x[j] = v[pos] / l1;
                }
                let l2 = x.norm();
                if best.as_ref().is_none_or(|(b, _)| l2 > *b) {
                    best = Some((l2, x));
                }
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    match best {
        Some((_, w)) => Ok(DiameterResult::from_witness(w, DiameterKind::Exact, evaluations)),
        None => Ok(DiameterResult {
            evaluations,
            ..DiameterResult::zero(n, DiameterKind::Exact)
        }),
    }
}

/// Advances `idx` to the next `|idx|`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let s = idx.len();
    let mut i = s;
    while i > 0 {
        i -= 1;
        if idx[i] < n - s + i {
            idx[i] += 1;
            for j in i + 1..s {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact diameter of `{x : xᵀA⁻¹x ≤ 1} ∩ span(B)`.
///
/// With `x = Bz` and `BᵀB = I`, the section is `{z : zᵀ(BᵀA⁻¹B)z ≤ 1}`, whose
/// longest semi-axis is `λ_min(BᵀA⁻¹B)^{-1/2}`.
pub fn ellipsoid_section_diameter<T: Scalar>(
    shape: &DMatrix<T>,
    kb: &KernelBasis<T>,
) -> Result<DiameterResult<T>> {
    let n = kb.ambient_dim();
    crate::error::check_dim(n, shape.nrows())?;
    crate::error::check_dim(n, shape.ncols())?;
    if kb.dim() == 0 {
        return Ok(DiameterResult::zero(n, DiameterKind::Exact));
    }
    let eig = SymmetricEigen::new(shape.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > T::zero()) {
        return Err(Error::input("ellipsoid shape must be positive definite"));
    }
    if hi / lo > T::lit(MAX_CONDITION) {
        return Err(Error::Conditioning(format!(
            "shape condition number {} exceeds {MAX_CONDITION:e}",
            hi / lo
        )));
    }
    let inv = shape
        .clone()
        .cholesky()
        .ok_or_else(|| Error::input("ellipsoid shape must be positive definite"))?
        .inverse();
    let reduced = kb.basis.tr_mul(&(&inv * &kb.basis));
    let reduced = (&reduced + reduced.transpose()) * T::lit(0.5);
    let red = SymmetricEigen::new(reduced);
    let j = red.eigenvalues.imin();
    let lam = red.eigenvalues[j];
    let z = red.eigenvectors.column(j).into_owned();
    let witness = kb.lift(&z) / lam.sqrt();
    Ok(DiameterResult::from_witness(witness, DiameterKind::Exact, 1))
}

/// Linear maximization over `B₁ⁿ ∩ ker Γ` as an LP in `(y⁺, y⁻, slack)`,
/// warm-started from the previous optimal basis.
#[derive(Clone)]
struct SectionLp<T: Scalar> {
    simplex: lp::Simplex<T>,
    a: DMatrix<T>,
    b: Vec<T>,
    n: usize,
}

impl<T: Scalar> SectionLp<T> {
    fn new(gamma: &DMatrix<T>) -> Result<Self> {
        let (k, n) = gamma.shape();
        let a = DMatrix::from_fn(k + 1, 2 * n + 1, |i, j| {
            if i == k {
                T::one()
            } else if j < n {
                gamma[(i, j)]
            } else if j < 2 * n {
                -gamma[(i, j - n)]
            } else {
                T::zero()
            }
        });
        let mut b = vec![T::zero(); k + 1];
        b[k] = T::one();
        let simplex = Self::phase_one(&a, &b)?;
        Ok(SectionLp { simplex, a, b, n })
    }

    fn phase_one(a: &DMatrix<T>, b: &[T]) -> Result<lp::Simplex<T>> {
        lp::Simplex::new(a, b, lp::default_tol()).map_err(|e| Error::Size(format!("section LP failed: {e:?}")))
    }

    /// `argmax ⟨c, y⟩` over the section. A failed warm start is retried once
    /// from a fresh phase one.
    fn maximize(&mut self, c: &DVector<T>) -> Result<DVector<T>> {
        match self.solve(c) {
            Ok(y) => Ok(y),
            Err(_) => {
                self.simplex = Self::phase_one(&self.a, &self.b)?;
                self.solve(c)
            }
        }
    }

    fn solve(&mut self, c: &DVector<T>) -> Result<DVector<T>> {
        let n = self.n;
        let cost: Vec<T> = (0..2 * n + 1)
            .map(|j| {
                if j < n {
                    -c[j]
                } else if j < 2 * n {
                    c[j - n]
                } else {
                    T::zero()
                }
            })
            .collect();
        match self.simplex.minimize(&cost) {
            LpOutcome::Optimal { x, .. } => Ok(DVector::from_fn(n, |i, _| x[i] - x[n + i])),
            other => Err(Error::Size(format!("section LP failed: {other:?}"))),
        }
    }
}

/// Lower bound on `diam(B₁ⁿ ∩ ker Γ)` by successive linearization.
///
/// Starting from `max_y yᵢ` for up to `starts` coordinates `i`, each round
/// solves `max ⟨y_prev, y⟩` over the section; since `‖y‖ ≥ ⟨y_prev, y⟩/‖y_prev‖`
/// the norm never decreases, and the iteration stops at a vertex that is a
/// local maximum of `‖·‖₂`. Needs only `Γ`, not a kernel basis.
pub fn crosspolytope_section_ascent<T: Scalar>(
    gamma: &DMatrix<T>,
    starts: usize,
    max_rounds: usize,
    stream: &RngStream,
) -> Result<DiameterResult<T>> {
    let (k, n) = gamma.shape();
    if n == 0 {
        return Err(Error::input("matrix must have at least one column"));
    }
    if starts < 1 {
        return Err(Error::input("need at least one start"));
    }
    if k == 0 {
        return crosspolytope_section_diameter_exact(gamma, T::lit(crate::kernels::DEFAULT_REL_TOL));
    }
    let coords: Vec<usize> = if starts >= n {
        (0..n).collect()
    } else {
        let mut v = sample_indices(&mut stream.rng(), n, starts).into_vec();
        v.sort_unstable();
        v
    };
    let tol = T::lit(1e-12);
    let base = SectionLp::new(gamma)?;
    let runs: Vec<Result<(DVector<T>, usize)>> = coords
        .par_iter()
        .map(|&i| {
            let mut lp = base.clone();
            let mut c = DVector::zeros(n);
            c[i] = T::one();
            let mut y = lp.maximize(&c)?;
            let mut evaluations = 1;
            for _ in 0..max_rounds {
                if y.norm() == T::zero() {
                    break;
                }
                let next = lp.maximize(&y)?;
                evaluations += 1;
                if next.norm() <= y.norm() * (T::one() + tol) {
                    break;
                }
                y = next;
            }
            Ok((y, evaluations))
        })
        .collect();
    let mut best: Option<DVector<T>> = None;
    let mut evaluations = 0;
    for r in runs {
        let (y, e) = r?;
        evaluations += e;
        if best.as_ref().is_none_or(|b| y.norm() > b.norm()) {
            best = Some(y);
        }
    }
    let mut w = best.expect("starts ≥ 1");
    // clean up LP round-off so the witness sits inside B₁ⁿ
    let l1 = w.iter().fold(T::zero(), |a, x| a + x.abs());
    if l1 > T::one() {
        w /= l1;
    }
    Ok(DiameterResult::from_witness(w, DiameterKind::LowerBound, evaluations))
}
