//! Dense row-stochastic matrices and their stationary distributions.
//!
//! This is the reference path used to check the closed forms: the chains are
//! built transition by transition and solved numerically.

use crate::error::{CoexError, Result};
use crate::scalar::Scalar;

/// Dense square matrix, row-major, rows indexed by the source state.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> StochasticMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        StochasticMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CoexError::invalid("matrix", "rows must be square"));
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> T {
        self.data[from * self.n + to]
    }

    /// Adds `p` to the transition `from -> to`.
    pub fn add(&mut self, from: usize, to: usize, p: T) {
        self.data[from * self.n + to] = self.data[from * self.n + to] + p;
    }

    pub fn row(&self, from: usize) -> &[T] {
        &self.data[from * self.n..(from + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).iter().fold(T::zero(), |a, &b| a + b))
            .collect()
    }

    /// Fails on the first row whose sum is off by more than `tol` or that
    /// holds a negative entry.
    pub fn check_stochastic(&self, tol: T) -> Result<()> {
        for (i, s) in self.row_sums().into_iter().enumerate() {
            let negative = self.row(i).iter().any(|&v| v < -tol);
            if (s - T::one()).abs() > tol || negative || !s.is_finite() {
                return Err(CoexError::NotStochastic {
                    row: i,
                    sum: s.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// `pi * M`.
    pub fn left_mul(&self, pi: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (i, &w) in pi.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o = *o + w * m;
            }
        }
        out
    }
}

/// Stationary vector `pi` with `pi M = pi` and `sum(pi) = 1`.
///
/// Solves `(M^T - I) pi = 0` with one balance equation replaced by the
/// normalization row, by Gaussian elimination with partial pivoting. Chains
/// with transient states are fine as long as there is a single recurrent
/// class; a second null direction is reported as [`CoexError::Singular`].
pub fn stationary_distribution<T: Scalar>(matrix: &StochasticMatrix<T>) -> Result<Vec<T>> {
    let n = matrix.dim();
    if n == 0 {
        return Err(CoexError::invalid("matrix", "empty"));
    }
    matrix.check_stochastic(T::lit(1e-9))?;

    // augmented system [A | b], A = M^T - I with the last row all ones
    let w = n + 1;
    let mut a = vec![T::zero(); n * w];
    for i in 0..n {
        for j in 0..n {
            a[j * w + i] = matrix.get(i, j);
        }
    }
    for i in 0..n {
        a[i * w + i] = a[i * w + i] - T::one();
    }
    for j in 0..n {
        a[(n - 1) * w + j] = T::one();
    }
    a[(n - 1) * w + n] = T::one();

    let tiny = T::lit(1e-13);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * w + col]
                    .abs()
                    .partial_cmp(&a[r2 * w + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        // NaN pivots fail this test too
        let pivot = a[pivot_row * w + col].abs();
        if pivot.is_nan() || pivot <= tiny {
            return Err(CoexError::Singular);
        }
        if pivot_row != col {
            for j in col..w {
                a.swap(col * w + j, pivot_row * w + j);
            }
        }
        let p = a[col * w + col];
        for r in col + 1..n {
            let f = a[r * w + col] / p;
            if f == T::zero() {
                continue;
            }
            for j in col..w {
                a[r * w + j] = a[r * w + j] - f * a[col * w + j];
            }
        }
    }
    let mut pi = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = a[i * w + n];
        for j in i + 1..n {
            s = s - a[i * w + j] * pi[j];
        }
        pi[i] = s / a[i * w + i];
    }
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(CoexError::NonFinite {
            quantity: "stationary distribution",
        });
    }
    // round-off can leave -1e-17 on transient states
    for v in pi.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let total = pi.iter().fold(T::zero(), |acc, &v| acc + v);
    Ok(pi.into_iter().map(|v| v / total).collect())
}

/// `max_j |(pi M)_j - pi_j|`.
pub fn stationary_residual<T: Scalar>(matrix: &StochasticMatrix<T>, pi: &[T]) -> T {
    matrix
        .left_mul(pi)
        .iter()
        .zip(pi)
        .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
}
