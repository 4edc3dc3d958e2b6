//! Dense two-phase simplex for small linear programs in standard form
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  x ≥ 0
//! ```
//!
//! Used for exact gauges of vertex hulls and for linear maximization over
//! cross-polytope sections. Problem sizes are a few hundred rows at most.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, objective: T },
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Pivot tolerance suited to the scalar type (about 4e-10 for `f64`).
pub fn default_tol<T: Scalar>() -> T {
    T::eps().powf(T::lit(0.6))
}

#[derive(Clone)]
struct Tableau<T> {
    rows: usize,
    width: usize,
    /// rows × width, last column is the right-hand side; row `rows` is the cost row.
    data: Vec<T>,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> T {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = T::one() / self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] *= inv;
        }
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [T]| {
            let f = row[pc];
            if f != T::zero() {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * *p;
                }
                row[pc] = T::zero();
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
    }

    /// Round-off can leave basic values slightly negative; reset them to zero.
    fn clamp_rhs(&mut self) {
        let w = self.width;
        for r in 0..self.rows {
            let v = &mut self.data[r * w + w - 1];
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }

    /// Runs simplex iterations on the cost row over columns `< allowed`.
    fn optimize(&mut self, allowed: usize, tol: T, max_iter: usize) -> Option<bool> {
        let cost = self.rows;
        let mut degenerate_streak = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_streak > 50;
            let mut enter = None;
            let mut best = -tol;
            for c in 0..allowed {
                let rc = self.at(cost, c);
                if rc < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(pc) = enter else {
                return Some(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > tol {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie_wins = if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                a > self.at(lr, pc)
                            };
                            if ratio < lratio - tol || (ratio <= lratio + tol && tie_wins) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else {
                return Some(false);
            };
            if ratio <= tol {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(pr, pc);
            self.clamp_rhs();
        }
        None
    }
}

/// A feasible basis of `Ax = b, x ≥ 0` that can be re-optimized for
/// successive cost vectors without repeating phase one.
#[derive(Clone)]
pub struct Simplex<T> {
    tab: Tableau<T>,
    cols: usize,
    tol: T,
    max_iter: usize,
}

impl<T: Scalar> Simplex<T> {
    /// Runs phase one. Returns `Err(Infeasible)` or `Err(IterationLimit)` on failure.
    pub fn new(a: &DMatrix<T>, b: &[T], tol: T) -> std::result::Result<Self, LpOutcome<T>> {
        let (m, n) = a.shape();
        assert_eq!(b.len(), m, "rhs length");
        let width = n + m + 1;
        let mut data = vec![T::zero(); (m + 1) * width];
        for r in 0..m {
            let sign = if b[r] < T::zero() { -T::one() } else { T::one() };
            for col in 0..n {
                data[r * width + col] = sign * a[(r, col)];
            }
            data[r * width + n + r] = T::one();
            data[r * width + width - 1] = sign * b[r];
        }
        // phase one cost: sum of artificials, priced out against the basis
        for r in 0..m {
            for col in 0..width {
                if col < n || col == width - 1 {
                    let v = data[r * width + col];
                    data[m * width + col] -= v;
                }
            }
        }
        let mut tab = Tableau {
            rows: m,
            width,
            data,
            basis: (n..n + m).collect(),
        };
        let max_iter = 50 * (m + n) + 1000;
        match tab.optimize(n, tol, max_iter) {
            None => return Err(LpOutcome::IterationLimit),
            Some(false) => return Err(LpOutcome::Infeasible),
            Some(true) => {}
        }
        let bnorm = b.iter().fold(T::zero(), |acc, v| acc + v.abs());
        if -tab.rhs(m) > tol * (T::one() + bnorm) * T::lit(10.0) {
            return Err(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis where possible
        for r in 0..m {
            if tab.basis[r] >= n {
                let mut best: Option<(usize, T)> = None;
                for col in 0..n {
                    let v = tab.at(r, col).abs();
                    if v > tol && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((col, v));
                    }
                }
                if let Some((col, _)) = best {
                    tab.pivot(r, col);
                    tab.clamp_rhs();
                }
            }
        }
        Ok(Simplex { tab, cols: n, tol, max_iter })
    }

    /// Minimizes `cᵀx` starting from the current basis, which is kept for the
    /// next call.
    pub fn minimize(&mut self, c: &[T]) -> LpOutcome<T> {
        let n = self.cols;
        assert_eq!(c.len(), n, "cost length");
        let tab = &mut self.tab;
        let (m, width) = (tab.rows, tab.width);
        for col in 0..width {
            tab.data[m * width + col] = T::zero();
        }
        for (col, cc) in c.iter().enumerate() {
            tab.data[m * width + col] = *cc;
        }
        for r in 0..m {
            let bv = tab.basis[r];
            if bv < n {
                let f = c[bv];
                if f != T::zero() {
                    for col in 0..width {
                        let v = tab.at(r, col);
                        tab.data[m * width + col] -= f * v;
                    }
                }
            }
        }
        match tab.optimize(n, self.tol, self.max_iter) {
            None => LpOutcome::IterationLimit,
            Some(false) => LpOutcome::Unbounded,
            Some(true) => {
                let mut x = vec![T::zero(); n];
                for r in 0..m {
                    if tab.basis[r] < n {
                        x[tab.basis[r]] = tab.rhs(r).max(T::zero());
                    }
                }
                let objective = x.iter().zip(c).fold(T::zero(), |acc, (xi, ci)| acc + *xi * *ci);
                LpOutcome::Optimal { x, objective }
            }
        }
    }
}

/// Solves `min cᵀx, Ax = b, x ≥ 0` with a dense two-phase tableau.
///
/// Dantzig pricing, switching to Bland's rule after a long run of degenerate
/// pivots. Ties in the ratio test go to the largest pivot element.
pub fn minimize<T: Scalar>(a: &DMatrix<T>, b: &[T], c: &[T], tol: T) -> LpOutcome<T> {
    assert_eq!(c.len(), a.ncols(), "cost length");
    match Simplex::new(a, b, tol) {
        Ok(mut s) => s.minimize(c),
        Err(e) => e,
    }
}
