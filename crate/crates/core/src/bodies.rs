//! Centrally symmetric convex bodies given through exact oracles.
//!
//! Every body exposes its support function `h_T(u) = sup_{t∈T} ⟨u,t⟩` (which
//! for symmetric `T` is the polar norm `‖u‖_{T°}`), its gauge, membership, the
//! Euclidean circumradius `d_T`, and the support function of the localized
//! body `T ∩ rB₂ⁿ`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::lp::{self, LpOutcome};
use crate::scalar::Scalar;

/// Ternary-search iterations for the cross-polytope localized support.
pub const TERNARY_ITERS: usize = 200;
/// Iterations of the generic subgradient solver for localized support.
pub const SUBGRADIENT_ITERS: usize = 2000;
/// Relative duality gap below which a localized support value counts as converged.
pub const LOCALIZED_REL_TOL: f64 = 1e-6;

/// Exponent of an ℓ_p ball; `∞` is a tag, never a float sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent<T> {
    Finite(T),
    Infinity,
}

impl<T: Scalar> Exponent<T> {
    pub fn finite(p: T) -> Result<Self> {
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::input(format!("exponent p must lie in [1, inf), got {p}")));
        }
        Ok(Exponent::Finite(p))
    }

    /// Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> Self {
        match self {
            Exponent::Infinity => Exponent::Finite(T::one()),
            Exponent::Finite(p) if p == T::one() => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - T::one())),
        }
    }
}

/// `‖x‖_p`, computed with max-scaling for finite `p ∉ {1, 2}`.
pub fn lp_norm<T: Scalar>(x: &DVector<T>, p: Exponent<T>) -> T {
    match p {
        Exponent::Infinity => x.amax(),
        Exponent::Finite(p) if p == T::one() => x.iter().fold(T::zero(), |a, v| a + v.abs()),
        Exponent::Finite(p) if p == T::lit(2.0) => x.norm(),
        Exponent::Finite(p) => {
            let m = x.amax();
            if m == T::zero() {
                return T::zero();
            }
            let s = x.iter().fold(T::zero(), |a, v| a + (v.abs() / m).powf(p));
            m * s.powf(T::one() / p)
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipsoidData<T: Scalar> {
    /// `A` in `E = {x : xᵀA⁻¹x ≤ 1}`; its eigenvalues are the squared semi-axes.
    pub shape: DMatrix<T>,
    pub shape_inv: DMatrix<T>,
    pub eig_max: T,
    pub eig_min: T,
}

#[derive(Debug, Clone)]
pub struct HullData<T: Scalar> {
    /// One representative per ± pair, stored as columns (n × M).
    pub vertices: DMatrix<T>,
}

#[derive(Debug, Clone)]
pub enum BodyKind<T: Scalar> {
    LpBall(Exponent<T>),
    Ellipsoid(EllipsoidData<T>),
    VertexHull(HullData<T>),
}

#[derive(Debug, Clone)]
pub struct ConvexBody<T: Scalar> {
    dim: usize,
    kind: BodyKind<T>,
}

/// Result of a localized support evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedSupport<T> {
    /// Upper bound on `h_{T∩rB₂}(u)` (exact for closed-form cases).
    pub value: T,
    /// Certified lower bound from a feasible point of `T ∩ rB₂`.
    pub lower: T,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> LocalizedSupport<T> {
    fn exact(value: T) -> Self {
        Self {
            value,
            lower: value,
            converged: true,
            iterations: 0,
        }
    }
}

impl<T: Scalar> ConvexBody<T> {
    pub fn lp_ball(dim: usize, p: Exponent<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dimension must be positive"));
        }
        if let Exponent::Finite(v) = p {
            Exponent::finite(v)?;
        }
        Ok(Self {
            dim,
            kind: BodyKind::LpBall(p),
        })
    }

    pub fn l1(dim: usize) -> Self {
        Self::lp_ball(dim, Exponent::Finite(T::one())).expect("valid exponent")
    }

    pub fn l2(dim: usize) -> Self {
        Self::lp_ball(dim, Exponent::Finite(T::lit(2.0))).expect("valid exponent")
    }

    pub fn linf(dim: usize) -> Self {
        Self::lp_ball(dim, Exponent::Infinity).expect("valid exponent")
    }

    /// Ellipsoid `{x : xᵀA⁻¹x ≤ 1}` for a symmetric positive-definite `A`.
    pub fn ellipsoid(shape: DMatrix<T>) -> Result<Self> {
        let (r, c) = shape.shape();
        if r != c || r == 0 {
            return Err(Error::input("ellipsoid shape must be a nonempty square matrix"));
        }
        let scale = shape.amax();
        let asym = (&shape - shape.transpose()).amax();
        if asym > T::lit(1e-10) * scale.max(T::one()) {
            return Err(Error::input("ellipsoid shape must be symmetric"));
        }
        let eig = SymmetricEigen::new(shape.clone());
        let eig_min = eig.eigenvalues.min();
        let eig_max = eig.eigenvalues.max();
        if !(eig_min > T::zero()) {
            return Err(Error::input("ellipsoid shape must be positive definite"));
        }
        let shape_inv = shape
            .clone()
            .cholesky()
            .ok_or_else(|| Error::input("ellipsoid shape must be positive definite"))?
            .inverse();
        Ok(Self {
            dim: r,
            kind: BodyKind::Ellipsoid(EllipsoidData {
                shape,
                shape_inv,
                eig_max,
                eig_min,
            }),
        })
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn ellipsoid_axes(axes: &[T]) -> Result<Self> {
        if axes.iter().any(|a| !(*a > T::zero())) {
            return Err(Error::input("semi-axes must be positive"));
        }
        let diag = DVector::from_iterator(axes.len(), axes.iter().map(|a| *a * *a));
        Self::ellipsoid(DMatrix::from_diagonal(&diag))
    }

    /// Convex hull of `±v` over the given vertices; they must span ℝⁿ.
    pub fn vertex_hull(vertices: &[DVector<T>]) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::input("vertex hull needs at least one vertex"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::input("dimension must be positive"));
        }
        for v in vertices {
            check_dim(dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::input("vertex coordinates must be finite"));
            }
        }
        let mat = DMatrix::from_columns(vertices);
        let sv = mat.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let rank = sv.iter().filter(|s| **s > T::lit(1e-10) * smax).count();
        if rank < dim {
            return Err(Error::input(format!(
                "vertex hull has empty interior (rank {rank} < {dim})"
            )));
        }
        Ok(Self {
            dim,
            kind: BodyKind::VertexHull(HullData { vertices: mat }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind<T> {
        &self.kind
    }

    pub fn is_cross_polytope(&self) -> bool {
        matches!(self.kind, BodyKind::LpBall(Exponent::Finite(p)) if p == T::one())
    }

    pub fn is_euclidean_ball(&self) -> bool {
        matches!(self.kind, BodyKind::LpBall(Exponent::Finite(p)) if p == T::lit(2.0))
    }

    /// `h_T(u) = ‖u‖_{T°}`.
    pub fn support(&self, u: &DVector<T>) -> Result<T> {
        check_dim(self.dim, u.len())?;
        Ok(self.support_unchecked(u))
    }

    pub(crate) fn support_unchecked(&self, u: &DVector<T>) -> T {
        match &self.kind {
            BodyKind::LpBall(p) => lp_norm(u, p.dual()),
            BodyKind::Ellipsoid(e) => quad_form(&e.shape, u).max(T::zero()).sqrt(),
            BodyKind::VertexHull(h) => (h.vertices.tr_mul(u)).amax(),
        }
    }

    /// A maximizer `t ∈ ∂T` of `⟨u, t⟩` (zero for `u = 0`).
    pub fn support_point(&self, u: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.dim, u.len())?;
        Ok(self.support_point_unchecked(u))
    }

    fn support_point_unchecked(&self, u: &DVector<T>) -> DVector<T> {
        let n = self.dim;
        if u.iter().all(|v| *v == T::zero()) {
            return DVector::zeros(n);
        }
        match &self.kind {
            BodyKind::LpBall(Exponent::Infinity) => u.map(sign),
            BodyKind::LpBall(Exponent::Finite(p)) if *p == T::one() => {
                let i = u.iamax();
                let mut t = DVector::zeros(n);
                t[i] = sign(u[i]);
                t
            }
            BodyKind::LpBall(Exponent::Finite(p)) if *p == T::lit(2.0) => u / u.norm(),
            BodyKind::LpBall(p) => {
                let q = match p.dual() {
                    Exponent::Finite(q) => q,
                    Exponent::Infinity => unreachable!("p = 1 handled above"),
                };
                let uq = lp_norm(u, Exponent::Finite(q));
                u.map(|v| sign(v) * (v.abs() / uq).powf(q - T::one()))
            }
            BodyKind::Ellipsoid(e) => {
                let au = &e.shape * u;
                let h = u.dot(&au).sqrt();
                au / h
            }
            BodyKind::VertexHull(h) => {
                let scores = h.vertices.tr_mul(u);
                let j = scores.iamax();
                h.vertices.column(j) * sign(scores[j])
            }
        }
    }

    /// Minkowski functional `inf{t > 0 : x/t ∈ T}`; zero at the origin.
    pub fn gauge(&self, x: &DVector<T>) -> Result<T> {
        check_dim(self.dim, x.len())?;
        self.gauge_unchecked(x)
    }

    pub(crate) fn gauge_unchecked(&self, x: &DVector<T>) -> Result<T> {
        if x.iter().all(|v| *v == T::zero()) {
            return Ok(T::zero());
        }
        match &self.kind {
            BodyKind::LpBall(p) => Ok(lp_norm(x, *p)),
            BodyKind::Ellipsoid(e) => Ok(quad_form(&e.shape_inv, x).max(T::zero()).sqrt()),
            BodyKind::VertexHull(h) => hull_gauge(&h.vertices, x),
        }
    }

    pub fn membership(&self, x: &DVector<T>, tol: T) -> Result<bool> {
        if tol < T::zero() {
            return Err(Error::input("membership tolerance must be nonnegative"));
        }
        Ok(self.gauge(x)? <= T::one() + tol)
    }

    /// `d_T = sup_{t∈T} ‖t‖₂`.
    pub fn euclidean_radius(&self) -> T {
        match &self.kind {
            BodyKind::LpBall(Exponent::Infinity) => T::from_usize(self.dim).unwrap().sqrt(),
            BodyKind::LpBall(Exponent::Finite(p)) => {
                if *p <= T::lit(2.0) {
                    T::one()
                } else {
                    let n = T::from_usize(self.dim).unwrap();
                    n.powf(T::lit(0.5) - T::one() / *p)
                }
            }
            BodyKind::Ellipsoid(e) => e.eig_max.sqrt(),
            BodyKind::VertexHull(h) => h
                .vertices
                .column_iter()
                .map(|c| c.norm())
                .fold(T::zero(), |a, b| a.max(b)),
        }
    }

    /// Support function of `T ∩ rB₂ⁿ`, i.e. the localized polar norm.
    ///
    /// Solves `inf_v h_T(u − v) + r‖v‖₂`. Closed forms cover the Euclidean
    /// ball, the cube and `r ≥ d_T`; the cross-polytope reduces to a convex
    /// scalar search over the soft-threshold level; everything else runs a
    /// subgradient method and reports a duality gap.
    pub fn localized_support(
        &self,
        r: T,
        u: &DVector<T>,
        iters: usize,
    ) -> Result<LocalizedSupport<T>> {
        check_dim(self.dim, u.len())?;
        if !(r > T::zero()) {
            return Err(Error::input(format!("localization radius must be positive, got {r}")));
        }
        if iters == 0 {
            return Err(Error::input("iteration count must be at least 1"));
        }
        if r >= self.euclidean_radius() {
            return Ok(LocalizedSupport::exact(self.support_unchecked(u)));
        }
        match &self.kind {
            BodyKind::LpBall(Exponent::Finite(p)) if *p == T::lit(2.0) => {
                Ok(LocalizedSupport::exact(r.min(T::one()) * u.norm()))
            }
            BodyKind::LpBall(Exponent::Finite(p)) if *p == T::one() => {
                Ok(cross_polytope_localized(r, u, iters))
            }
            BodyKind::LpBall(Exponent::Infinity) => Ok(LocalizedSupport::exact(cube_localized(r, u))),
            _ => self.localized_subgradient(r, u, iters),
        }
    }

    fn localized_subgradient(
        &self,
        r: T,
        u: &DVector<T>,
        iters: usize,
    ) -> Result<LocalizedSupport<T>> {
        let unorm = u.norm();
        if unorm == T::zero() {
            return Ok(LocalizedSupport::exact(T::zero()));
        }
        let tol = T::lit(LOCALIZED_REL_TOL);
        let objective = |v: &DVector<T>| self.support_unchecked(&(u - v)) + r * v.norm();
        let mut lower = T::zero();
        // feasible points of T ∩ rB₂ give lower bounds
        let consider = |t: DVector<T>, lower: &mut T| -> Result<()> {
            let tn = t.norm();
            let mut t = if tn > r { t * (r / tn) } else { t };
            let g = self.gauge_unchecked(&t)?;
            if g > T::one() {
                t /= g;
            }
            *lower = lower.max(u.dot(&t));
            Ok(())
        };
        consider(self.support_point_unchecked(u), &mut lower)?;
        consider(u * (r / unorm), &mut lower)?;

        let f0 = objective(&DVector::zeros(self.dim));
        let fu = r * unorm;
        let (mut v, mut best) = if f0 <= fu {
            (DVector::zeros(self.dim), f0)
        } else {
            (u.clone(), fu)
        };
        if best - lower <= tol * (T::one() + best) {
            return Ok(LocalizedSupport {
                value: best,
                lower,
                converged: true,
                iterations: 0,
            });
        }
        let mut done = 0;
        for it in 1..=iters {
            done = it;
            let s = self.support_point_unchecked(&(u - &v));
            consider(s.clone(), &mut lower)?;
            let vn = v.norm();
            let mut g = -s;
            if vn > T::zero() {
                g += &v * (r / vn);
            }
            let gn = g.norm();
            if gn == T::zero() {
                break;
            }
            let step = unorm / T::from_usize(it).unwrap().sqrt() * T::lit(0.5);
            v -= g * (step / gn);
            let f = objective(&v);
            if f < best {
                best = f;
            }
            if best - lower <= tol * (T::one() + best) {
                break;
            }
        }
        Ok(LocalizedSupport {
            value: best,
            lower,
            converged: best - lower <= tol * (T::one() + best),
            iterations: done,
        })
    }
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn quad_form<T: Scalar>(m: &DMatrix<T>, x: &DVector<T>) -> T {
    x.dot(&(m * x))
}

fn hull_gauge<T: Scalar>(vertices: &DMatrix<T>, x: &DVector<T>) -> Result<T> {
    let (n, m) = vertices.shape();
    let a = DMatrix::from_fn(n, 2 * m, |i, j| {
        if j < m {
            vertices[(i, j)]
        } else {
            -vertices[(i, j - m)]
        }
    });
    let cost = vec![T::one(); 2 * m];
    match lp::minimize(&a, x.as_slice(), &cost, lp::default_tol()) {
        LpOutcome::Optimal { objective, .. } => Ok(objective),
        LpOutcome::Infeasible => Ok(T::lit(f64::INFINITY)),
        LpOutcome::Unbounded => unreachable!("nonnegative cost is bounded below"),
        LpOutcome::IterationLimit => Err(Error::Size("vertex hull gauge LP did not terminate".into())),
    }
}

/// `t + r‖soft(u, t)‖₂`, the cross-polytope infimal-convolution objective.
pub(crate) fn soft_threshold_objective<T: Scalar>(u: &DVector<T>, r: T, t: T) -> T {
    let ss = u.iter().fold(T::zero(), |acc, v| {
        let d = (v.abs() - t).max(T::zero());
        acc + d * d
    });
    t + r * ss.sqrt()
}

fn cross_polytope_localized<T: Scalar>(r: T, u: &DVector<T>, iters: usize) -> LocalizedSupport<T> {
    let mut lo = T::zero();
    let mut hi = u.amax();
    let f = |t: T| soft_threshold_objective(u, r, t);
    let mut best = f(lo).min(f(hi));
    let third = T::lit(1.0 / 3.0);
    for _ in 0..iters {
        let a = lo + (hi - lo) * third;
        let b = hi - (hi - lo) * third;
        let (fa, fb) = (f(a), f(b));
        best = best.min(fa).min(fb);
        if fa <= fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = (lo + hi) * T::lit(0.5);
    best = best.min(f(mid));
    let n = T::from_usize(u.len()).unwrap();
    let lipschitz = T::one() + r * n.sqrt();
    let lower = best - lipschitz * (hi - lo);
    LocalizedSupport {
        value: best,
        lower,
        converged: best - lower <= T::lit(LOCALIZED_REL_TOL) * (T::one() + best),
        iterations: iters,
    }
}

/// Exact `max ⟨u,t⟩` over `‖t‖_∞ ≤ 1, ‖t‖₂ ≤ r`: the optimizer clips the
/// largest coordinates at ±1 and scales the rest proportionally to `u`.
fn cube_localized<T: Scalar>(r: T, u: &DVector<T>) -> T {
    let mut mags: Vec<T> = u.iter().map(|v| v.abs()).filter(|v| *v > T::zero()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let r2 = r * r;
    let mut rest_sq = mags.iter().fold(T::zero(), |a, v| a + *v * *v);
    let mut clipped_sum = T::zero();
    for (j, &m) in mags.iter().enumerate() {
        let jj = T::from_usize(j).unwrap();
        if jj >= r2 {
            break;
        }
        // clip the first j coordinates, scale the remainder by lambda
        let lambda = ((r2 - jj) / rest_sq).sqrt();
        if lambda * m <= T::one() {
            return clipped_sum + ((r2 - jj) * rest_sq).sqrt();
        }
        clipped_sum += m;
        rest_sq -= m * m;
        if rest_sq <= T::zero() {
            break;
        }
    }
    // every nonzero coordinate clipped (only reachable when nnz ≤ r²)
    clipped_sum
}

/// Body description used on the command line and in sweep configs.
#[derive(Debug, Clone, PartialEq)]
pub enum BodySpec {
    L1,
    L2,
    Linf,
    Lp(f64),
    Ellipsoid(Vec<f64>),
    Hull(PathBuf),
}

impl FromStr for BodySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "l1" => return Ok(BodySpec::L1),
            "l2" => return Ok(BodySpec::L2),
            "linf" => return Ok(BodySpec::Linf),
            _ => {}
        }
        if let Some(p) = s.strip_prefix("lp:") {
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad exponent in `{s}`")))?;
            if !(p >= 1.0) {
                return Err(Error::input(format!("exponent must be >= 1 in `{s}`")));
            }
            return Ok(BodySpec::Lp(p));
        }
        if let Some(axes) = s.strip_prefix("ellipsoid:") {
            let axes = axes
                .split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::input(format!("bad semi-axes in `{s}`")))?;
            return Ok(BodySpec::Ellipsoid(axes));
        }
        if let Some(path) = s.strip_prefix("hull:") {
            return Ok(BodySpec::Hull(PathBuf::from(path.trim())));
        }
        Err(Error::input(format!("unknown body `{s}`")))
    }
}

impl fmt::Display for BodySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodySpec::L1 => write!(f, "l1"),
            BodySpec::L2 => write!(f, "l2"),
            BodySpec::Linf => write!(f, "linf"),
            BodySpec::Lp(p) => write!(f, "lp:{p}"),
            BodySpec::Ellipsoid(a) => {
                let parts: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                write!(f, "ellipsoid:{}", parts.join(","))
            }
            BodySpec::Hull(p) => write!(f, "hull:{}", p.display()),
        }
    }
}

impl BodySpec {
    pub fn build<T: Scalar>(&self, n: usize) -> Result<ConvexBody<T>> {
        match self {
            BodySpec::L1 => ConvexBody::lp_ball(n, Exponent::Finite(T::one())),
            BodySpec::L2 => ConvexBody::lp_ball(n, Exponent::Finite(T::lit(2.0))),
            BodySpec::Linf => ConvexBody::lp_ball(n, Exponent::Infinity),
            BodySpec::Lp(p) => ConvexBody::lp_ball(n, Exponent::finite(T::lit(*p))?),
            BodySpec::Ellipsoid(axes) => {
                if axes.len() != n {
                    return Err(Error::input(format!(
                        "ellipsoid has {} semi-axes but n = {n}",
                        axes.len()
                    )));
                }
                let axes: Vec<T> = axes.iter().map(|a| T::lit(*a)).collect();
                ConvexBody::ellipsoid_axes(&axes)
            }
            BodySpec::Hull(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
                let verts = parse_vertex_csv::<T>(&text)?;
                let body = ConvexBody::vertex_hull(&verts)?;
                check_dim(n, body.dim())?;
                Ok(body)
            }
        }
    }
}

/// One vertex per line, comma separated; blank lines and `#` comments skipped.
pub fn parse_vertex_csv<T: Scalar>(text: &str) -> Result<Vec<DVector<T>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let coords = l
                .split(',')
                .map(|c| c.trim().parse::<f64>().map(T::lit))
                .collect::<std::result::Result<Vec<T>, _>>()
                .map_err(|_| Error::input(format!("bad vertex row `{l}`")))?;
            Ok(DVector::from_vec(coords))
        })
        .collect()
}
