//! Orthonormal bases of `ker Γ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Singular values at or below `DEFAULT_REL_TOL · σ_max` count as zero.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KernelBasis<T: Scalar> {
    /// n × m, orthonormal columns spanning `ker Γ`.
    pub basis: DMatrix<T>,
    pub source_rank: usize,
    /// Relative singular-value cutoff used for the rank decision.
    pub tol: T,
    pub source: DMatrix<T>,
    /// Largest singular value of `source`.
    pub source_norm: T,
}

impl<T: Scalar> KernelBasis<T> {
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Kernel dimension `m = n − rank`.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projection `B Bᵀ x` onto the kernel.
    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.ambient_dim(), x.len())?;
        Ok(&self.basis * self.basis.tr_mul(x))
    }

    /// Lifts kernel coordinates `z ∈ ℝᵐ` to `Bz ∈ ℝⁿ`.
    pub fn lift(&self, z: &DVector<T>) -> DVector<T> {
        &self.basis * z
    }
}

/// Computes an orthonormal basis of `ker Γ` from the SVD of `Γ`.
///
/// The rank is the number of singular values above `rel_tol · σ_max`; the
/// kernel is the orthogonal complement of the retained right singular
/// vectors, completed with Householder reflections so that it is orthonormal
/// to working precision even when `k ≪ n`.
pub fn kernel_basis<T: Scalar>(gamma: &DMatrix<T>, rel_tol: T) -> Result<KernelBasis<T>> {
    let (k, n) = gamma.shape();
    if n == 0 {
        return Err(Error::input("matrix must have at least one column"));
    }
    if gamma.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    if !(rel_tol >= T::zero()) {
        return Err(Error::input("rel_tol must be nonnegative"));
    }
    if k == 0 || gamma.iter().all(|v| *v == T::zero()) {
        return Ok(KernelBasis {
            basis: DMatrix::identity(n, n),
            source_rank: 0,
            tol: rel_tol,
            source: gamma.clone(),
            source_norm: T::zero(),
        });
    }
    let svd = gamma.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let cut = rel_tol * smax;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > cut)
        .map(|(i, _)| i)
        .collect();
    let rank = keep.len();
    let row_space = DMatrix::from_fn(n, rank, |i, j| v_t[(keep[j], i)]);
    Ok(KernelBasis {
        basis: orthogonal_complement(&row_space),
        source_rank: rank,
        tol: rel_tol,
        source: gamma.clone(),
        source_norm: smax,
    })
}

/// Orthonormal basis of the complement of `span(cols)` for `cols` with
/// orthonormal (or at least independent) columns.
fn orthogonal_complement<T: Scalar>(cols: &DMatrix<T>) -> DMatrix<T> {
    let (n, r) = cols.shape();
    let mut work = cols.clone();
    let mut reflectors: Vec<DVector<T>> = Vec::with_capacity(r);
    for j in 0..r {
        let x = work.view((j, j), (n - j, 1)).column(0).into_owned();
        let alpha = x.norm();
        let mut v = x;
        let s = if v[0] >= T::zero() { T::one() } else { -T::one() };
        v[0] += s * alpha;
        let vn = v.norm();
        if vn > T::zero() {
            v /= vn;
        }
        // H = I − 2vvᵀ applied to the trailing block
        for c in j..r {
            let mut col = work.view_mut((j, c), (n - j, 1));
            let d = v.dot(&col) * T::lit(2.0);
            col.zip_apply(&v, |a, b| *a -= d * b);
        }
        reflectors.push(v);
    }
    let mut out = DMatrix::zeros(n, n - r);
    for (c, mut col) in out.column_iter_mut().enumerate() {
        col[r + c] = T::one();
        for (j, v) in reflectors.iter().enumerate().rev() {
            let mut tail = col.rows_mut(j, n - j);
            let d = v.dot(&tail) * T::lit(2.0);
            tail.axpy(-d, v, T::one());
        }
    }
    out
}
