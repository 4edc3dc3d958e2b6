//! Monte Carlo estimates of polar-norm expectations: the Gaussian mean width
//! `E‖G‖_{T°}`, the row-sum width `E‖k^{-1/2}ΣXᵢ‖_{T°}`, and the localized
//! width `E‖G‖_{(T∩rB₂)°}`.
//!
//! Samples are split into fixed blocks, each with its own substream, and the
//! per-block moments are merged in block order. The result therefore does not
//! depend on how many worker threads evaluate the blocks.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bodies::{ConvexBody, TERNARY_ITERS, SUBGRADIENT_ITERS};
use crate::ensembles::Ensemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Samples per independently seeded block.
pub const BLOCK: usize = 512;
/// Default sample count for sweeps.
pub const SWEEP_SAMPLES: usize = 10_000;
/// Default sample count for acceptance-grade estimates.
pub const ACCEPTANCE_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthKind {
    GaussianWidth,
    RowSumWidth,
    LocalizedGaussianWidth,
    /// `R₂ · (E‖X‖²_{T°})^{1/2}`, the heavy-tail replacement for the row-sum width.
    Type2Moment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthEstimate<T> {
    pub mean: T,
    /// Sample standard deviation over `√samples`.
    pub stderr: T,
    pub samples: usize,
    pub kind: WidthKind,
    /// Localized evaluations that stopped before reaching the gap tolerance.
    pub unconverged: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
    pub flagged: usize,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        Moments {
            count: self.count + other.count,
            mean: self.mean + d * other.count as f64 / n,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * other.count as f64 / n,
            flagged: self.flagged + other.flagged,
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Blocked, order-stable Monte Carlo mean of `f`. `f` returns the value and
/// whether to flag it.
pub(crate) fn blocked_mean<F>(samples: usize, stream: &RngStream, f: F) -> Result<Moments>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(f64, bool)> + Sync,
{
    let blocks = samples.div_ceil(BLOCK);
    let parts: Vec<Result<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let len = BLOCK.min(samples - b * BLOCK);
            let mut m = Moments::default();
            for _ in 0..len {
                let (v, flag) = f(&mut rng)?;
                m.push(v);
                m.flagged += flag as usize;
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total)
}

pub(crate) fn gaussian_vector<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| T::lit(StandardNormal.sample(rng)))
}

fn estimate<T: Scalar>(m: Moments, kind: WidthKind) -> WidthEstimate<T> {
    WidthEstimate {
        mean: T::lit(m.mean),
        stderr: T::lit(m.stderr()),
        samples: m.count,
        kind,
        unconverged: m.flagged,
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::input(format!("need at least 2 samples, got {samples}")));
    }
    Ok(())
}

/// `ℓ*(T) = E h_T(G)` over standard Gaussian `G`.
pub fn mc_mean_width<T: Scalar>(
    body: &ConvexBody<T>,
    samples: usize,
    stream: &RngStream,
) -> Result<WidthEstimate<T>> {
    check_samples(samples)?;
    let n = body.dim();
    let m = blocked_mean(samples, stream, |rng| {
        let g = gaussian_vector::<T, _>(n, rng);
        Ok((body.support_unchecked(&g).as_f64(), false))
    })?;
    Ok(estimate(m, WidthKind::GaussianWidth))
}

/// `E h_T(k^{-1/2} Σᵢ₌₁ᵏ Xᵢ)` for iid rows of `ens`.
pub fn row_sum_width<T: Scalar>(
    body: &ConvexBody<T>,
    ens: &Ensemble,
    k: usize,
    samples: usize,
    stream: &RngStream,
) -> Result<WidthEstimate<T>> {
    check_samples(samples)?;
    if k < 1 {
        return Err(Error::input("k must be at least 1"));
    }
    crate::error::check_dim(body.dim(), ens.dim)?;
    let m = blocked_mean(samples, stream, |rng| {
        let z = ens.draw_row_sum::<T, _>(k, rng);
        Ok((body.support_unchecked(&z).as_f64(), false))
    })?;
    Ok(estimate(m, WidthKind::RowSumWidth))
}

/// `E h_{T∩rB₂}(G)`, the ball-localized Gaussian width.
pub fn localized_mean_width<T: Scalar>(
    body: &ConvexBody<T>,
    r: T,
    samples: usize,
    stream: &RngStream,
) -> Result<WidthEstimate<T>> {
    check_samples(samples)?;
    if !(r > T::zero()) {
        return Err(Error::input(format!("localization radius must be positive, got {r}")));
    }
    let n = body.dim();
    let iters = localized_iters(body);
    let m = blocked_mean(samples, stream, |rng| {
        let g = gaussian_vector::<T, _>(n, rng);
        let h = body.localized_support(r, &g, iters)?;
        Ok((h.value.as_f64(), !h.converged))
    })?;
    Ok(estimate(m, WidthKind::LocalizedGaussianWidth))
}

pub(crate) fn localized_iters<T: Scalar>(body: &ConvexBody<T>) -> usize {
    if body.is_cross_polytope() {
        TERNARY_ITERS
    } else {
        SUBGRADIENT_ITERS
    }
}

/// Mean of `h_T(X)²` over draws of `X`; returns the raw moments.
pub(crate) fn support_second_moment<T: Scalar>(
    body: &ConvexBody<T>,
    ens: &Ensemble,
    samples: usize,
    stream: &RngStream,
) -> Result<Moments> {
    check_samples(samples)?;
    crate::error::check_dim(body.dim(), ens.dim)?;
    blocked_mean(samples, stream, |rng| {
        let x = ens.draw::<T, _>(rng);
        let h = body.support_unchecked(&x).as_f64();
        Ok((h * h, false))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;

    /// `E‖G‖₂ = √2 Γ((n+1)/2) / Γ(n/2)`.
    fn chi_mean(n: usize) -> f64 {
        use statrs::function::gamma::ln_gamma;
        2f64.sqrt() * (ln_gamma((n as f64 + 1.0) / 2.0) - ln_gamma(n as f64 / 2.0)).exp()
    }

    /// `E max(|g₁|,|g₂|) = ∫₀^∞ 1 − (2Φ(t) − 1)² dt` by Simpson's rule.
    fn max_abs_two_gaussians() -> f64 {
        use statrs::function::erf::erf;
        let f = |t: f64| 1.0 - erf(t / 2f64.sqrt()).powi(2);
        let (a, b, n) = (0.0, 12.0, 20_000);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn oracles_have_expected_values() {
        assert!((chi_mean(16) - 3.938).abs() < 1e-3);
        assert!((10.0 * (2.0 / std::f64::consts::PI).sqrt() - 7.979).abs() < 1e-3);
        // 2/√π ≈ 1.1284 for the maximum of two half-normals
        assert!((max_abs_two_gaussians() - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn euclidean_width() {
        let w = mc_mean_width(&ConvexBody::<f64>::l2(16), ACCEPTANCE_SAMPLES, &RngStream::new(1, 0)).unwrap();
        assert!((w.mean - chi_mean(16)).abs() < 3.0 * w.stderr, "{w:?}");
        assert_eq!(w.samples, ACCEPTANCE_SAMPLES);
    }

    #[test]
    fn cube_width() {
        let w = mc_mean_width(&ConvexBody::<f64>::linf(10), ACCEPTANCE_SAMPLES, &RngStream::new(2, 0)).unwrap();
        let oracle = 10.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((w.mean - oracle).abs() < 3.0 * w.stderr, "{w:?}");
    }

    #[test]
    fn cross_polytope_width_n2() {
        let w = mc_mean_width(&ConvexBody::<f64>::l1(2), ACCEPTANCE_SAMPLES, &RngStream::new(3, 0)).unwrap();
        let oracle = max_abs_two_gaussians();
        assert!((w.mean - oracle).abs() < 3.0 * w.stderr, "{w:?} vs {oracle}");
    }

    #[test]
    fn too_few_samples() {
        let b = ConvexBody::<f64>::l2(3);
        assert!(mc_mean_width(&b, 1, &RngStream::new(0, 0)).is_err());
        let e = Ensemble::new(EnsembleKind::Gaussian, 4).unwrap();
        assert!(row_sum_width(&b, &e, 2, 100, &RngStream::new(0, 0)).is_err());
        assert!(localized_mean_width(&b, -1.0, 100, &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn estimates_are_independent_of_thread_count() {
        let b = ConvexBody::<f64>::l1(20);
        let s = RngStream::new(4, 4);
        let a = mc_mean_width(&b, 5000, &s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| mc_mean_width(&b, 5000, &s).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn gaussian_row_sum_matches_mean_width() {
        let b = ConvexBody::<f64>::l1(30);
        let e = Ensemble::new(EnsembleKind::Gaussian, 30).unwrap();
        let g = mc_mean_width(&b, 20_000, &RngStream::new(5, 0)).unwrap();
        let r = row_sum_width(&b, &e, 7, 20_000, &RngStream::new(5, 1)).unwrap();
        let joint = (g.stderr.powi(2) + r.stderr.powi(2)).sqrt();
        assert!((g.mean - r.mean).abs() < 3.0 * joint);
    }

    #[test]
    fn uniform_row_sum_approaches_gaussian() {
        let b = ConvexBody::<f64>::l1(50);
        let e = Ensemble::new(EnsembleKind::UniformCube, 50).unwrap();
        let g = mc_mean_width(&b, 20_000, &RngStream::new(6, 0)).unwrap();
        let r = row_sum_width(&b, &e, 100, 5_000, &RngStream::new(6, 1)).unwrap();
        assert!((r.mean / g.mean - 1.0).abs() < 0.05, "{} vs {}", r.mean, g.mean);
    }

    #[test]
    fn exponential_single_row_matches_direct_sampling() {
        let n = 12;
        let b = ConvexBody::<f64>::l1(n);
        let e = Ensemble::new(EnsembleKind::SymmetricExponential, n).unwrap();
        let w = row_sum_width(&b, &e, 1, 40_000, &RngStream::new(7, 0)).unwrap();
        let mut rng = RngStream::new(7, 99).rng();
        let direct: f64 = (0..40_000)
            .map(|_| e.draw::<f64, _>(&mut rng).amax())
            .sum::<f64>()
            / 40_000.0;
        assert!((w.mean - direct).abs() < 4.0 * w.stderr, "{} vs {direct}", w.mean);
    }

    #[test]
    fn localized_width_cases() {
        let s = RngStream::new(8, 0);
        let l2 = ConvexBody::<f64>::l2(16);
        let w = localized_mean_width(&l2, 0.3, ACCEPTANCE_SAMPLES, &s).unwrap();
        let oracle = 0.3 * chi_mean(16);
        assert!((w.mean - oracle).abs() < 3.0 * w.stderr, "{w:?} vs {oracle}");

        let l1 = ConvexBody::<f64>::l1(16);
        let full = mc_mean_width(&l1, 4000, &s).unwrap();
        let big = localized_mean_width(&l1, 1.0, 4000, &s).unwrap();
        assert_eq!(full.mean, big.mean);

        let ws: Vec<f64> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&r| localized_mean_width(&l1, r, 4000, &s).unwrap().mean)
            .collect();
        assert!(ws[0] <= ws[1] && ws[1] <= ws[2], "{ws:?}");
        let eucl = mc_mean_width(&ConvexBody::<f64>::l2(16), 4000, &s).unwrap();
        assert!(ws[0] <= full.mean.min(0.1 * eucl.mean) + 1e-12);
    }

    #[test]
    fn scale_equivariance() {
        let s = RngStream::new(9, 0);
        let axes = [0.5, 1.0, 1.5, 2.0];
        let a = ConvexBody::<f64>::ellipsoid_axes(&axes).unwrap();
        let b = ConvexBody::<f64>::ellipsoid_axes(&axes.map(|v| 2.0 * v)).unwrap();
        let wa = mc_mean_width(&a, 3000, &s).unwrap();
        let wb = mc_mean_width(&b, 3000, &s).unwrap();
        assert!((wb.mean - 2.0 * wa.mean).abs() < 1e-12 * wb.mean);
    }
}
