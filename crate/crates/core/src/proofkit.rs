//! Simulation checks of the probabilistic steps behind the diameter bound:
//! the binomial small-ball estimate, its union over a net, ρ-separated nets
//! on `T ∩ rSⁿ⁻¹`, and the oscillation term controlled by the widths.
//!
//! Suprema over infinite sets are replaced by maxima over sampled points, so
//! every check here is one-sided: a failure refutes, a pass does not prove.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::bodies::ConvexBody;
use crate::ensembles::{Ensemble, EnsembleKind};
use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::widths::{gaussian_vector, mc_mean_width, row_sum_width};

/// `δ` of the order-statistic check.
pub const DEFAULT_DELTA: f64 = 0.1;
/// `ε` used for net sizing and the oscillation bound.
pub const DEFAULT_EPSILON: f64 = 1.0 / 600.0;
/// Attempts at drawing one point of `T ∩ rSⁿ⁻¹` before giving up.
pub const SPHERE_POINT_ATTEMPTS: usize = 1000;
/// Hard cap on candidates examined by [`separated_net`], as a multiple of the budget.
pub const NET_CANDIDATE_FACTOR: usize = 20;

/// Analytic binomial estimate against its target, both in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// `ln[(e/(6ε))^{6εk} · ε^{6εk}]`.
    pub log_analytic: f64,
    /// `ln 2^{−6εk}`.
    pub log_target: f64,
}

impl TailBound {
    pub fn analytic(&self) -> f64 {
        self.log_analytic.exp()
    }

    pub fn target(&self) -> f64 {
        self.log_target.exp()
    }

    pub fn holds(&self) -> bool {
        self.log_analytic <= self.log_target
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0 / 12.0) {
        return Err(Error::input(format!("epsilon must lie in (0, 1/12), got {eps}")));
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::input("k must be at least 1"));
    }
    Ok(())
}

/// `(e/(6ε))^{6εk} ε^{6εk}` and `2^{−6εk}`.
pub fn binomial_tail_bound(eps: f64, k: usize) -> Result<TailBound> {
    check_epsilon(eps)?;
    check_k(k)?;
    let m = 6.0 * eps * k as f64;
    let log_analytic = m * ((std::f64::consts::E / (6.0 * eps)).ln() + eps.ln());
    let log_target = -m * std::f64::consts::LN_2;
    Ok(TailBound { log_analytic, log_target })
}

/// Wilson score interval for `successes` out of `trials` at `z` standard deviations.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One draw of `ζ₁, …, ζ_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallBallTrial {
    pub k: usize,
    pub epsilon: f64,
    pub lambda_level: f64,
    /// Coordinates with `|ζⱼ| < λ‖ζ‖_{L₂}`.
    pub bad_count: usize,
    /// `bad_count ≤ 6εk`.
    pub passed: bool,
}

/// Draws `k` iid copies of a unit-variance scalar law and counts small coordinates.
pub fn smallball_trial<R: Rng + ?Sized>(
    kind: &EnsembleKind,
    lambda: f64,
    eps: f64,
    k: usize,
    rng: &mut R,
) -> SmallBallTrial {
    let bad_count = (0..k).filter(|_| kind.sample_scalar(rng).abs() < lambda).count();
    SmallBallTrial {
        k,
        epsilon: eps,
        lambda_level: lambda,
        bad_count,
        passed: bad_count as f64 <= 6.0 * eps * k as f64,
    }
}

/// Empirical failure frequency against an analytic bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub failures: usize,
    pub trials: usize,
    pub failure_rate: f64,
    pub bound: f64,
    /// Half-width of the one-sigma Wilson interval around `failure_rate`.
    pub wilson_width: f64,
}

impl SimOutcome {
    fn new(failures: usize, trials: usize, bound: f64) -> Self {
        let (lo, hi) = wilson_interval(failures, trials, 1.0);
        SimOutcome {
            failures,
            trials,
            failure_rate: failures as f64 / trials as f64,
            bound,
            wilson_width: (hi - lo) / 2.0,
        }
    }

    /// `failure_rate ≤ bound + sigmas · wilson_width`.
    pub fn consistent(&self, sigmas: f64) -> bool {
        self.failure_rate <= self.bound + sigmas * self.wilson_width
    }
}

fn check_sim(lambda: f64, trials: usize) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::input(format!("lambda must be nonnegative, got {lambda}")));
    }
    if trials < 1 {
        return Err(Error::input("need at least one trial"));
    }
    Ok(())
}

/// Fraction of trials with more than `6εk` coordinates below `λ`, against `2^{−6εk}`.
pub fn lemma_smallball_sim(
    kind: &EnsembleKind,
    lambda: f64,
    eps: f64,
    k: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<SimOutcome> {
    check_epsilon(eps)?;
    check_k(k)?;
    check_sim(lambda, trials)?;
    let failures = (0..trials)
        .into_par_iter()
        .filter(|&t| !smallball_trial(kind, lambda, eps, k, &mut stream.substream(t as u64).rng()).passed)
        .count();
    Ok(SimOutcome::new(failures, trials, (-6.0 * eps * k as f64).exp2()))
}

/// Largest number of vectors allowed by the union bound, `⌊2^{3εk}⌋`.
pub fn corollary_capacity(eps: f64, k: usize) -> f64 {
    (3.0 * eps * k as f64).exp2().floor()
}

/// Fraction of trials in which some of `count` independent vectors fails,
/// against `2^{−3εk}`.
pub fn corollary_sim(
    count: usize,
    kind: &EnsembleKind,
    lambda: f64,
    eps: f64,
    k: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<SimOutcome> {
    check_epsilon(eps)?;
    check_k(k)?;
    check_sim(lambda, trials)?;
    if count < 1 || count as f64 > corollary_capacity(eps, k) {
        return Err(Error::input(format!(
            "N = {count} must lie in [1, 2^(3εk)] = [1, {}]",
            corollary_capacity(eps, k)
        )));
    }
    let failures = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = stream.substream(t as u64).rng();
            (0..count).any(|_| !smallball_trial(kind, lambda, eps, k, &mut rng).passed)
        })
        .count();
    Ok(SimOutcome::new(failures, trials, (-3.0 * eps * k as f64).exp2()))
}

/// Empirical `ε`-quantile of `|ζ|`, the level at which the scalar small-ball
/// premise `P(|ζ| ≥ λ) ≥ 1 − ε` is just met.
pub fn premise_lambda(kind: &EnsembleKind, eps: f64, samples: usize, stream: &RngStream) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::input(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if samples < 1 {
        return Err(Error::input("need at least one sample"));
    }
    let mut rng = stream.rng();
    let mut v: Vec<f64> = (0..samples).map(|_| kind.sample_scalar(&mut rng).abs()).collect();
    v.sort_by(f64::total_cmp);
    let idx = ((eps * samples as f64).floor() as usize).min(samples - 1);
    Ok(v[idx])
}

#[derive(Debug, Clone)]
pub struct NetResult<T: Scalar> {
    pub points: Vec<DVector<T>>,
    pub rho: T,
    pub r: T,
    pub cardinality: usize,
    /// The hard candidate cap stopped the construction before the run of
    /// `candidate_budget` consecutive rejections that signals approximate maximality.
    pub budget_exhausted: bool,
    pub candidates: usize,
}

impl<T: Scalar> NetResult<T> {
    /// Exact pairwise separation, sphere and membership checks.
    pub fn verify(&self, body: &ConvexBody<T>, tol: T) -> Result<bool> {
        for (i, p) in self.points.iter().enumerate() {
            if (p.norm() - self.r).abs() > tol || !body.membership(p, tol)? {
                return Ok(false);
            }
            for q in &self.points[..i] {
                if (p - q).norm() < self.rho {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Draws one point of `T ∩ rSⁿ⁻¹`.
///
/// For a random direction `d` the radial point `d/‖d‖_T` is used when it lies
/// outside `rB₂`, giving `r·d/‖d‖₂`. Otherwise the segment from the radial
/// point to the support point of `d` (which lies in `T`) is intersected with
/// `rSⁿ⁻¹`. Directions where neither applies are redrawn.
pub fn sample_sphere_point<T: Scalar, R: Rng + ?Sized>(
    body: &ConvexBody<T>,
    r: T,
    rng: &mut R,
) -> Result<Option<DVector<T>>> {
    let n = body.dim();
    for _ in 0..SPHERE_POINT_ATTEMPTS {
        let mut d = gaussian_vector::<T, _>(n, rng);
        let dn = d.norm();
        if dn == T::zero() {
            continue;
        }
        d /= dn;
        let g = body.gauge(&d)?;
        if !(g > T::zero()) || r * g <= T::one() {
            return Ok(Some(d * r));
        }
        let a = &d / g;
        let b = body.support_point(&d)?;
        let bn = b.norm();
        if bn < r {
            continue;
        }
        // ‖a + t(b − a)‖ = r with ‖a‖ < r ≤ ‖b‖ has a unique root in (0, 1]
        let v = &b - &a;
        let qa = v.dot(&v);
        let qb = T::lit(2.0) * a.dot(&v);
        let qc = a.dot(&a) - r * r;
        let disc = (qb * qb - T::lit(4.0) * qa * qc).max(T::zero());
        let t = (-qb + disc.sqrt()) / (T::lit(2.0) * qa);
        let mut x = a + v * t;
        let xn = x.norm();
        x *= r / xn;
        return Ok(Some(x));
    }
    Ok(None)
}

/// Greedy ρ-separated subset of `T ∩ rSⁿ⁻¹`.
///
/// Candidates are drawn with [`sample_sphere_point`] and kept when they are at
/// distance at least `rho` from every kept point. The construction stops after
/// `candidate_budget` consecutive rejections, or at the hard cap of
/// `NET_CANDIDATE_FACTOR · candidate_budget` candidates.
pub fn separated_net<T: Scalar>(
    body: &ConvexBody<T>,
    r: T,
    rho: T,
    candidate_budget: usize,
    stream: &RngStream,
) -> Result<NetResult<T>> {
    if !(rho > T::zero()) {
        return Err(Error::input(format!("rho must be positive, got {rho}")));
    }
    if !(r > T::zero()) {
        return Err(Error::input(format!("r must be positive, got {r}")));
    }
    if candidate_budget < 1 {
        return Err(Error::input("candidate budget must be at least 1"));
    }
    if r > body.euclidean_radius() {
        return Err(Error::EmptySet(format!(
            "r = {r} exceeds the Euclidean radius {} of the body",
            body.euclidean_radius()
        )));
    }
    let mut rng = stream.rng();
    let cap = candidate_budget.saturating_mul(NET_CANDIDATE_FACTOR);
    let mut points: Vec<DVector<T>> = Vec::new();
    let mut streak = 0;
    let mut candidates = 0;
    while streak < candidate_budget && candidates < cap {
        candidates += 1;
        let accepted = match sample_sphere_point(body, r, &mut rng)? {
            Some(x) => {
                let separated = points.iter().all(|p| (p - &x).norm() >= rho);
                if separated && body.membership(&x, T::lit(1e-9))? {
                    points.push(x);
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        streak = if accepted { 0 } else { streak + 1 };
    }
    Ok(NetResult {
        cardinality: points.len(),
        points,
        rho,
        r,
        budget_exhausted: streak < candidate_budget,
        candidates,
    })
}

/// Settings of [`empirical_oscillation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationConfig {
    /// Independent draws of `X₁, …, X_k`.
    pub draws: usize,
    /// Sampled points of `T ∩ rSⁿ⁻¹` per draw.
    pub probe_points: usize,
    /// Samples for the two width estimates in the right-hand side.
    pub width_samples: usize,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        OscillationConfig {
            draws: 200,
            probe_points: 64,
            width_samples: 10_000,
            delta: DEFAULT_DELTA,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Oscillation statistics of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawOscillation {
    /// `max_x (1/k)Σᵢ|⟨Xᵢ, x − π(x)⟩|` over the probes.
    pub sup: f64,
    /// Largest `(k/100)`-th order statistic of `|⟨Xᵢ, x − π(x)⟩|` over the probes.
    pub order_stat: f64,
    /// `max_x ‖x − π(x)‖₂ · (1/k)Σᵢ‖Xᵢ‖₂`.
    pub cauchy_schwarz_cap: f64,
    /// `ρ · (1/k)Σᵢ‖Xᵢ‖₂`.
    pub rho_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    /// Mean over draws of the sampled supremum.
    pub a_hat: f64,
    /// `ℓ*(T)/√(εk) + 4·E‖k^{-1/2}ΣXᵢ‖_{T°}/√k`.
    pub rhs: f64,
    /// Every probe satisfied `(k/100)`-th largest term `≤ 100·a_hat/δ`.
    pub rearrangement_ok: bool,
    /// Fraction of draws whose sampled supremum is at most `rhs`.
    pub fraction_below_rhs: f64,
    pub draws: Vec<DrawOscillation>,
}

fn nearest<'a, T: Scalar>(net: &'a [DVector<T>], x: &DVector<T>) -> &'a DVector<T> {
    net.iter()
        .min_by(|a, b| {
            (*a - x)
                .norm_squared()
                .partial_cmp(&(*b - x).norm_squared())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("nonempty net")
}

/// Oscillation statistics of the rows `xs` (k × n, unnormalized) at the given probes.
pub fn oscillation_statistic<T: Scalar>(
    net: &NetResult<T>,
    xs: &DMatrix<T>,
    probes: &[DVector<T>],
) -> Result<DrawOscillation> {
    if net.points.is_empty() {
        return Err(Error::input("net is empty"));
    }
    let k = xs.nrows();
    check_k(k)?;
    let row_norm_mean = xs.row_iter().map(|r| r.norm().as_f64()).sum::<f64>() / k as f64;
    let m = (k / 100).max(1);
    let mut out = DrawOscillation {
        sup: 0.0,
        order_stat: 0.0,
        cauchy_schwarz_cap: 0.0,
        rho_cap: net.rho.as_f64() * row_norm_mean,
    };
    for x in probes {
        check_dim(xs.ncols(), x.len())?;
        let v = x - nearest(&net.points, x);
        let mut terms: Vec<f64> = (xs * &v).iter().map(|t| t.abs().as_f64()).collect();
        let s = terms.iter().sum::<f64>() / k as f64;
        terms.sort_by(|a, b| b.total_cmp(a));
        out.sup = out.sup.max(s);
        out.order_stat = out.order_stat.max(terms[m - 1]);
        out.cauchy_schwarz_cap = out.cauchy_schwarz_cap.max(v.norm().as_f64() * row_norm_mean);
    }
    Ok(out)
}

/// Sampled lower estimate of `A = E sup_{x∈T_r} (1/k)Σᵢ|⟨Xᵢ, x − π(x)⟩|`
/// against `ℓ*(T)/√(εk) + (4/k)E‖ΣXᵢ‖_{T°}`, plus the order-statistic check.
pub fn empirical_oscillation<T: Scalar>(
    body: &ConvexBody<T>,
    net: &NetResult<T>,
    ens: &Ensemble,
    k: usize,
    cfg: &OscillationConfig,
    stream: &RngStream,
) -> Result<OscillationReport> {
    if net.points.is_empty() {
        return Err(Error::input("net is empty"));
    }
    check_k(k)?;
    check_dim(body.dim(), ens.dim)?;
    if cfg.draws < 1 || cfg.probe_points < 1 {
        return Err(Error::input("draws and probe_points must be at least 1"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) || !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::input("delta and epsilon must lie in (0,1)"));
    }
    let draws: Vec<Result<DrawOscillation>> = (0..cfg.draws)
        .into_par_iter()
        .map(|d| {
            let s = stream.substream_of(&[0, d as u64]);
            let xs: DMatrix<T> = ens.sample_matrix::<T>(k, &s.substream(0))? * T::lit((k as f64).sqrt());
            let mut rng = s.substream(1).rng();
            let mut probes = Vec::with_capacity(cfg.probe_points);
            for _ in 0..cfg.probe_points {
                if let Some(p) = sample_sphere_point(body, net.r, &mut rng)? {
                    probes.push(p);
                }
            }
            if probes.is_empty() {
                return Err(Error::EmptySet("no probe point of T ∩ rS found".into()));
            }
            oscillation_statistic(net, &xs, &probes)
        })
        .collect();
    let draws: Vec<DrawOscillation> = draws.into_iter().collect::<Result<_>>()?;
    let a_hat = draws.iter().map(|d| d.sup).sum::<f64>() / draws.len() as f64;
    let gw = mc_mean_width(body, cfg.width_samples, &stream.substream_of(&[1, 0]))?;
    let rw = row_sum_width(body, ens, k, cfg.width_samples, &stream.substream_of(&[1, 1]))?;
    let kf = k as f64;
    let rhs = gw.mean.as_f64() / (cfg.epsilon * kf).sqrt() + 4.0 * rw.mean.as_f64() / kf.sqrt();
    let rearrangement_ok = draws.iter().all(|d| d.order_stat <= 100.0 * a_hat / cfg.delta);
    let fraction_below_rhs = draws.iter().filter(|d| d.sup <= rhs).count() as f64 / draws.len() as f64;
    Ok(OscillationReport { a_hat, rhs, rearrangement_ok, fraction_below_rhs, draws })
}
