//! Width-based diameter bounds: the main `(C/√k)·max{gw, rw}` bound, the
//! localized fixed points `r_k` and `ρ_k`, and the type-2 variant for
//! heavy-tailed rows.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bodies::{BodyKind, ConvexBody, Exponent};
use crate::ensembles::Ensemble;
use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::widths::{localized_iters, localized_mean_width, mc_mean_width, support_second_moment, WidthEstimate, WidthKind};

/// Bisection steps in the fixed-point searches.
pub const BISECTION_STEPS: usize = 10;
/// `ε` of the small-ball condition used by the proof chain.
pub const PROOF_EPSILON: f64 = 1.0 / 600.0;
/// Default `Q₁` and `Q₂` of the fixed-point definitions.
pub const DEFAULT_Q: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    TheoremMain,
    FixedPoint,
    Type2,
}

impl BoundVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundVariant::TheoremMain => "theorem_main",
            BoundVariant::FixedPoint => "fixed_point",
            BoundVariant::Type2 => "type2",
        }
    }
}

impl fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "theorem" | "theorem_main" => Ok(BoundVariant::TheoremMain),
            "fixed-point" | "fixed_point" => Ok(BoundVariant::FixedPoint),
            "type2" => Ok(BoundVariant::Type2),
            other => Err(Error::input(format!("unknown bound variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T: Scalar> {
    pub gaussian_width: WidthEstimate<T>,
    /// Row-sum width, or `R₂·(E‖X‖²_{T°})^{1/2}` for the type-2 variant.
    pub rowsum_width: WidthEstimate<T>,
    /// Small-ball level of the ensemble, when it was estimated.
    pub lambda_hat: Option<T>,
    pub k: usize,
    pub constant: T,
    pub bound_value: T,
    pub variant: BoundVariant,
}

fn check_constant<T: Scalar>(c: T) -> Result<()> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(Error::input(format!("constant must be positive and finite, got {c}")));
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::input("k must be at least 1"));
    }
    Ok(())
}

/// `(C/√k)·max(gw.mean, rw.mean)`.
pub fn theorem_bound<T: Scalar>(
    gw: WidthEstimate<T>,
    rw: WidthEstimate<T>,
    k: usize,
    c: T,
) -> Result<BoundReport<T>> {
    check_k(k)?;
    check_constant(c)?;
    let bound_value = c / T::lit(k as f64).sqrt() * gw.mean.max(rw.mean);
    Ok(BoundReport {
        gaussian_width: gw,
        rowsum_width: rw,
        lambda_hat: None,
        k,
        constant: c,
        bound_value,
        variant: BoundVariant::TheoremMain,
    })
}

/// The unoptimized constant of the proof chain,
/// `(200/(δλ))·(c_sud/√ε + 4)` with `ε = 1/600` and `c_sud = 1`.
pub fn proof_chain_constant(delta: f64, lambda: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    Ok(200.0 / (delta * lambda) * (1.0 / PROOF_EPSILON.sqrt() + 4.0))
}

/// Default `R₂(T°)`: the type-2 constant of the dual norm of the body.
///
/// `ℓ₁ⁿ` (dual `ℓ_∞ⁿ`) uses `√(ln n)`; `ℓ_p` with `p ≤ 2` (dual `ℓ_q`,
/// `q ≥ 2`) uses `√(q−1)`; Euclidean balls and ellipsoids use 1; `ℓ_p` with
/// `p > 2` uses the trivial `n^{1/p'−1/2}` with `p'` the dual exponent
/// (`√n` for the cube). Vertex hulls have no default.
pub fn default_type2_constant<T: Scalar>(body: &ConvexBody<T>) -> Option<f64> {
    let n = body.dim() as f64;
    match body.kind() {
        BodyKind::Ellipsoid(_) => Some(1.0),
        BodyKind::VertexHull(_) => None,
        BodyKind::LpBall(Exponent::Infinity) => Some(n.sqrt()),
        BodyKind::LpBall(Exponent::Finite(p)) => {
            let p = p.as_f64();
            if p == 1.0 {
                Some(n.ln().max(1.0).sqrt())
            } else if p <= 2.0 {
                let q = p / (p - 1.0);
                Some((q - 1.0).sqrt())
            } else {
                let q = p / (p - 1.0);
                Some(n.powf(1.0 / q - 0.5))
            }
        }
    }
}

/// `(C/√k)·max{E‖G‖_{T°}, R₂·(E‖X‖²_{T°})^{1/2}}`, both terms by Monte Carlo.
pub fn type2_bound<T: Scalar>(
    body: &ConvexBody<T>,
    ens: &Ensemble,
    k: usize,
    samples: usize,
    r2: f64,
    c: T,
    stream: &RngStream,
) -> Result<BoundReport<T>> {
    check_k(k)?;
    check_constant(c)?;
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::input(format!("R2 must be positive, got {r2}")));
    }
    check_dim(body.dim(), ens.dim)?;
    let gw = mc_mean_width(body, samples, &stream.substream(0))?;
    let m = support_second_moment(body, ens, samples, &stream.substream(1))?;
    let root = m.mean.max(0.0).sqrt();
    // delta method: se(√μ) = se(μ)/(2√μ)
    let se = if root > 0.0 { r2 * m.stderr() / (2.0 * root) } else { 0.0 };
    let second = WidthEstimate {
        mean: T::lit(r2 * root),
        stderr: T::lit(se),
        samples: m.count,
        kind: WidthKind::Type2Moment,
        unconverged: 0,
    };
    let bound_value = c / T::lit(k as f64).sqrt() * gw.mean.max(second.mean);
    Ok(BoundReport {
        gaussian_width: gw,
        rowsum_width: second,
        lambda_hat: None,
        k,
        constant: c,
        bound_value,
        variant: BoundVariant::Type2,
    })
}

/// Outcome of a monotone bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint<T> {
    /// Smallest examined point where the predicate holds (or the upper
    /// bracket end when `saturated`).
    pub value: T,
    /// Largest examined point where the predicate fails; equals `value`
    /// when the predicate already holds at the lower bracket end.
    pub violated_at: T,
    /// The predicate never held on the bracket.
    pub saturated: bool,
    pub steps: usize,
}

fn check_bracket<T: Scalar>(lo: T, hi: T) -> Result<()> {
    if !(lo > T::zero() && hi > lo && hi.is_finite()) {
        return Err(Error::input(format!("invalid bracket [{lo}, {hi}]")));
    }
    Ok(())
}

/// Bisection for the smallest point of `[lo, hi]` where a nondecreasing
/// predicate holds.
pub fn bisect<T: Scalar, F>(lo: T, hi: T, steps: usize, mut holds: F) -> Result<FixedPoint<T>>
where
    F: FnMut(T) -> Result<bool>,
{
    check_bracket(lo, hi)?;
    if holds(lo)? {
        return Ok(FixedPoint { value: lo, violated_at: lo, saturated: false, steps: 0 });
    }
    if !holds(hi)? {
        return Ok(FixedPoint { value: hi, violated_at: hi, saturated: true, steps: 0 });
    }
    let (mut a, mut b) = (lo, hi);
    let two = T::lit(2.0);
    for _ in 0..steps {
        let mid = (a + b) / two;
        if holds(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(FixedPoint { value: b, violated_at: a, saturated: false, steps })
}

fn check_q<T: Scalar>(q: T) -> Result<()> {
    if !(q > T::zero()) {
        return Err(Error::input(format!("Q must be positive, got {q}")));
    }
    Ok(())
}

/// `r_k(Q₂) = inf{r : E h_{T∩rB₂}(G) ≤ Q₂ r √k}`.
///
/// Every bisection step reuses the same Gaussian draws, so the predicate is
/// a deterministic function of `r` for a given stream.
pub fn fixed_point_r<T: Scalar>(
    body: &ConvexBody<T>,
    k: usize,
    q2: T,
    samples: usize,
    r_lo: T,
    r_hi: T,
    stream: &RngStream,
) -> Result<FixedPoint<T>> {
    check_k(k)?;
    check_q(q2)?;
    check_bracket(r_lo, r_hi)?;
    let sqrt_k = T::lit(k as f64).sqrt();
    bisect(r_lo, r_hi, BISECTION_STEPS, |r| {
        let w = localized_mean_width(body, r, samples, stream)?;
        Ok(w.mean <= q2 * r * sqrt_k)
    })
}

/// Empirical `q`-quantile (lower order statistic `⌈qN⌉`).
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// `ρ_k(δ,Q₁) = inf{ρ : P(h_{T∩ρB₂}(k^{-1/2}ΣXᵢ) ≥ Q₁ρ√k) ≤ δ}`.
///
/// The `samples` row sums are drawn once; the predicate at `ρ` compares the
/// empirical `(1−δ)`-quantile of their localized supports with `Q₁ρ√k`.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point_rho<T: Scalar>(
    body: &ConvexBody<T>,
    ens: &Ensemble,
    k: usize,
    delta: f64,
    q1: T,
    samples: usize,
    rho_lo: T,
    rho_hi: T,
    stream: &RngStream,
) -> Result<FixedPoint<T>> {
    check_k(k)?;
    check_q(q1)?;
    check_bracket(rho_lo, rho_hi)?;
    check_dim(body.dim(), ens.dim)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0,1), got {delta}")));
    }
    if samples < 1 {
        return Err(Error::input("need at least one sample"));
    }
    let sums: Vec<DVector<T>> = (0..samples)
        .into_par_iter()
        .map(|j| ens.draw_row_sum::<T, _>(k, &mut stream.substream(j as u64).rng()))
        .collect();
    let iters = localized_iters(body);
    let sqrt_k = T::lit(k as f64).sqrt();
    bisect(rho_lo, rho_hi, BISECTION_STEPS, |rho| {
        let vals: Result<Vec<f64>> = sums
            .par_iter()
            .map(|z| body.localized_support(rho, z, iters).map(|h| h.value.as_f64()))
            .collect();
        let mut vals = vals?;
        vals.sort_by(f64::total_cmp);
        Ok(quantile(&vals, 1.0 - delta) <= (q1 * rho * sqrt_k).as_f64())
    })
}
