//! Isotropic symmetric random vectors and the row matrices built from them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Number of points in the geometric λ grid.
pub const LAMBDA_GRID_POINTS: usize = 200;
pub const LAMBDA_GRID_MIN: f64 = 1e-4;
pub const LAMBDA_GRID_MAX: f64 = 1.0;

/// Coordinate law of an ensemble. All laws are symmetric with unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleKind {
    Gaussian,
    /// iid uniform on `[−√3, √3]`.
    UniformCube,
    /// iid Laplace, scaled to unit variance.
    SymmetricExponential,
    /// iid Student t with `nu > 2` degrees of freedom, scaled to unit variance.
    StudentT { nu: f64 },
    /// iid random signs. Isotropic but fails the small-ball condition on
    /// 2-sparse directions, where `⟨x, X⟩ = 0` with probability 1/2. Kept as a
    /// counterexample fixture only.
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub dim: usize,
}

impl EnsembleKind {
    /// One coordinate draw.
    #[inline]
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EnsembleKind::Gaussian => StandardNormal.sample(rng),
            EnsembleKind::UniformCube => {
                let s = 3f64.sqrt();
                rng.random_range(-s..=s)
            }
            EnsembleKind::SymmetricExponential => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e * std::f64::consts::FRAC_1_SQRT_2
            }
            EnsembleKind::StudentT { nu } => {
                let t: f64 = StudentT::new(nu).expect("validated nu").sample(rng);
                t * ((nu - 2.0) / nu).sqrt()
            }
            EnsembleKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Almost-sure bound on `|coordinate|`, where one exists.
    pub fn linf_bound(&self) -> Option<f64> {
        match self {
            EnsembleKind::UniformCube => Some(3f64.sqrt()),
            EnsembleKind::Rademacher => Some(1.0),
            _ => None,
        }
    }

    /// Whether empirical second-moment statistics converge slowly (infinite fourth moment).
    pub fn heavy_tailed(&self) -> bool {
        matches!(self, EnsembleKind::StudentT { nu } if *nu <= 4.0)
    }
}

impl Ensemble {
    pub fn new(kind: EnsembleKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("ensemble dimension must be positive"));
        }
        if let EnsembleKind::StudentT { nu } = kind {
            if !(nu > 2.0) || !nu.is_finite() {
                return Err(Error::input(format!(
                    "student t needs finite nu > 2 for unit variance, got {nu}"
                )));
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn linf_bound(&self) -> Option<f64> {
        self.kind.linf_bound()
    }

    /// One draw of `X`, consuming the generator.
    pub fn draw<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        DVector::from_fn(self.dim, |_, _| T::lit(self.kind.sample_scalar(rng)))
    }

    /// One draw of `X` from the start of `stream`.
    pub fn sample_vector<T: Scalar>(&self, stream: &RngStream) -> DVector<T> {
        self.draw(&mut stream.rng())
    }

    /// `Γ` with rows `Xᵢ/√k` for iid draws `X₁,…,X_k`.
    pub fn sample_matrix<T: Scalar>(&self, k: usize, stream: &RngStream) -> Result<DMatrix<T>> {
        if k < 1 {
            return Err(Error::input("k must be at least 1"));
        }
        let mut rng = stream.rng();
        let scale = 1.0 / (k as f64).sqrt();
        let mut m = DMatrix::zeros(k, self.dim);
        for i in 0..k {
            for j in 0..self.dim {
                m[(i, j)] = T::lit(self.kind.sample_scalar(&mut rng) * scale);
            }
        }
        Ok(m)
    }

    /// `k^{-1/2} Σᵢ Xᵢ` for `k` fresh draws.
    pub fn draw_row_sum<T: Scalar, R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> DVector<T> {
        let mut acc = vec![0.0f64; self.dim];
        for _ in 0..k {
            for a in acc.iter_mut() {
                *a += self.kind.sample_scalar(rng);
            }
        }
        let scale = 1.0 / (k as f64).sqrt();
        DVector::from_iterator(self.dim, acc.into_iter().map(|a| T::lit(a * scale)))
    }
}

/// Geometric grid from `LAMBDA_GRID_MIN` to `LAMBDA_GRID_MAX`.
pub fn lambda_grid() -> Vec<f64> {
    let ratio = (LAMBDA_GRID_MAX / LAMBDA_GRID_MIN).ln() / (LAMBDA_GRID_POINTS - 1) as f64;
    (0..LAMBDA_GRID_POINTS)
        .map(|i| LAMBDA_GRID_MIN * (ratio * i as f64).exp())
        .collect()
}

/// Test direction stored sparsely as `(coordinate, weight)` pairs, unit ℓ₂ norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(pub Vec<(usize, f64)>);

/// Coordinate axes, `(eᵢ ± eᵢ₊₁)/√2`, then `dense` random unit vectors.
pub fn small_ball_directions(n: usize, dense: usize, stream: &RngStream) -> Vec<Direction> {
    let mut dirs: Vec<Direction> = (0..n).map(|i| Direction(vec![(i, 1.0)])).collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    if n >= 2 {
        let pairs = if n == 2 { 1 } else { n };
        for i in 0..pairs {
            let j = (i + 1) % n;
            dirs.push(Direction(vec![(i, h), (j, h)]));
            dirs.push(Direction(vec![(i, h), (j, -h)]));
        }
    }
    let mut rng = stream.rng();
    for _ in 0..dense {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        dirs.push(Direction(g.into_iter().enumerate().map(|(i, v)| (i, v / norm)).collect()));
    }
    dirs
}

/// Largest grid value `λ̂` with `min_x P̂(|⟨x,X⟩| ≥ λ̂‖x‖₂) ≥ target_prob`.
///
/// The minimum runs over coordinate axes, a deterministic 2-sparse family and
/// `directions` random dense unit vectors; all directions share the same
/// `samples_per_direction` draws of `X`. Returns 0 if no grid value qualifies.
pub fn estimate_small_ball(
    ens: &Ensemble,
    directions: usize,
    samples_per_direction: usize,
    target_prob: f64,
    stream: &RngStream,
) -> Result<f64> {
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(Error::input(format!("target probability must lie in (0,1), got {target_prob}")));
    }
    if directions < 1 || samples_per_direction < 1 {
        return Err(Error::input("directions and samples_per_direction must be >= 1"));
    }
    let dirs = small_ball_directions(ens.dim, directions, &stream.substream(0));
    let grid = lambda_grid();
    let mut rng = stream.substream(1).rng();
    let mut proj: Vec<Vec<f64>> = vec![Vec::with_capacity(samples_per_direction); dirs.len()];
    let mut x = vec![0.0; ens.dim];
    for _ in 0..samples_per_direction {
        for xi in x.iter_mut() {
            *xi = ens.kind.sample_scalar(&mut rng);
        }
        for (d, p) in dirs.iter().zip(proj.iter_mut()) {
            p.push(d.0.iter().map(|(i, w)| w * x[*i]).sum::<f64>().abs());
        }
    }
    let need = (target_prob * samples_per_direction as f64).ceil().max(1.0) as usize;
    let mut lambda_hat = f64::INFINITY;
    for mut p in proj {
        // the `need`-th largest |⟨x,X⟩| is the largest admissible threshold
        p.sort_by(|a, b| b.partial_cmp(a).expect("finite projections"));
        let q = p[need - 1];
        let best = grid.iter().rev().find(|&&l| l <= q).copied().unwrap_or(0.0);
        lambda_hat = lambda_hat.min(best);
    }
    Ok(lambda_hat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropyCheck {
    /// `‖Σ̂ − I‖` in operator norm.
    pub deviation: f64,
    pub samples: usize,
    /// Set for laws whose sample covariance has infinite variance.
    pub slow_converging: bool,
}

/// Operator-norm distance between the empirical second-moment matrix of
/// `samples` draws and the identity.
pub fn isotropy_check(ens: &Ensemble, samples: usize, stream: &RngStream) -> Result<IsotropyCheck> {
    let n = ens.dim;
    if samples < n {
        return Err(Error::input(format!("need at least n = {n} samples, got {samples}")));
    }
    let mut rng = stream.rng();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut x = DVector::<f64>::zeros(n);
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = ens.kind.sample_scalar(&mut rng);
        }
        cov.syger(1.0, &x, &x, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= samples as f64;
    cov -= DMatrix::identity(n, n);
    let eig = SymmetricEigen::new(cov);
    Ok(IsotropyCheck {
        deviation: eig.eigenvalues.amax(),
        samples,
        slow_converging: ens.kind.heavy_tailed(),
    })
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => Ok(EnsembleKind::Gaussian),
            "uniform" => Ok(EnsembleKind::UniformCube),
            "exponential" => Ok(EnsembleKind::SymmetricExponential),
            "rademacher" => Ok(EnsembleKind::Rademacher),
            _ => {
                let nu = s
                    .strip_prefix("student:")
                    .ok_or_else(|| Error::input(format!("unknown ensemble `{s}`")))?;
                let nu: f64 = nu
                    .trim()
                    .parse()
                    .map_err(|_| Error::input(format!("bad degrees of freedom in `{s}`")))?;
                if !(nu > 2.0) || !nu.is_finite() {
                    return Err(Error::input(format!("student t needs nu > 2, got {nu}")));
                }
                Ok(EnsembleKind::StudentT { nu })
            }
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::Gaussian => write!(f, "gaussian"),
            EnsembleKind::UniformCube => write!(f, "uniform"),
            EnsembleKind::SymmetricExponential => write!(f, "exponential"),
            EnsembleKind::StudentT { nu } => write!(f, "student:{nu}"),
            EnsembleKind::Rademacher => write!(f, "rademacher"),
        }
    }
}
