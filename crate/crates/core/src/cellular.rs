//! Non-saturated LBT chain of a cellular small-cell base station.
//!
//! States are `(k)_e` (post-backoff, empty buffer) and `(k)` (backoff, packet
//! waiting) for `k < Z`. Unlike the Wi-Fi chain the contention window is
//! fixed, and a busy channel during either countdown re-draws the counter
//! uniformly instead of freezing it.
//!
//! Everything here is expressed relative to `b0e`, the stationary mass of
//! `(0)_e`:
//!
//! * post-backoff mass: `sum_k b(k)_e = P_idle (1 - p) b0e + (1 - q)(1 - p) / q * b0`
//! * backoff mass: `sum_k b(k) = eta * lambda * b0e + eta * mu * b0`
//! * head ratio: `b0 = gamma * b0e`
//!
//! and normalization gives `b0e`. The coefficients come from solving the
//! balance equations of [`cell_transition_matrix`] in closed form:
//!
//! ```text
//! x = (1 - q) P_idle            y = 1 - p
//! g(n) = (1 - y^n) / p          G(n) = g(1) + ... + g(n)
//! S = Z - beta(Z) / beta(1)     K = sum_{j=1}^{Z-1} y^(j-1) x^(Z-j)
//! F = q / beta(Z) * (g(Z-1) - K)
//! E = q / beta(Z) * (G(Z-1) - sum_{j=1}^{Z-1} x^(Z-j) g(j))
//!
//! eta    = p / (P_idle alpha(Z)) = 1 / (P_idle g(Z))
//! lambda = q P_idle^2 (g(Z) E - G(Z) F)
//! mu     = P_idle G(Z)
//! gamma  = q (1 - P_idle (1 - p) + q S / beta(Z)) / ((1 - q)(1 - p))
//! ```

use crate::config::Probability;
use crate::error::{CoexError, Result};
use crate::markov::StochasticMatrix;
use crate::scalar::{geometric_sum, one_minus_pow_complement, Scalar};

/// Below this size a difference that appears in a denominator is treated as
/// vanishing and the corresponding finite sum is evaluated term by term.
const SUM_GUARD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellChainInput<T> {
    pub q: Probability<T>,
    pub p: Probability<T>,
    pub p_idle: Probability<T>,
    /// Contention window `Z`.
    pub z: usize,
}

impl<T: Scalar> CellChainInput<T> {
    pub fn new(q: T, p: T, p_idle: T, z: usize) -> Result<Self> {
        let input = CellChainInput {
            q: Probability::new(q)?,
            p: Probability::new(p)?,
            p_idle: Probability::new(p_idle)?,
            z,
        };
        input.check()?;
        Ok(input)
    }

    fn check(&self) -> Result<()> {
        if self.z < 2 {
            return Err(CoexError::invalid("Z", "must be at least 2"));
        }
        Ok(())
    }

    /// Index of `(k)_e` in [`cell_transition_matrix`].
    pub fn post_backoff(&self, k: usize) -> usize {
        k
    }

    /// Index of `(k)` in [`cell_transition_matrix`].
    pub fn backoff(&self, k: usize) -> usize {
        self.z + k
    }
}

/// Coefficients of the closed-form stationary solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellClosedFormTerms<T> {
    pub q: T,
    pub p: T,
    pub p_idle: T,
    pub z: usize,
    pub eta: T,
    pub lambda: T,
    pub mu: T,
    /// `b0 / b0e`.
    pub gamma: T,
}

impl<T: Scalar> CellClosedFormTerms<T> {
    /// `alpha(x) = 1 - (1 - p)^x`.
    pub fn alpha(&self, x: usize) -> T {
        one_minus_pow_complement(self.p, x)
    }

    /// `beta(x) = 1 - ((1 - q) P_idle)^x`.
    pub fn beta(&self, x: usize) -> T {
        one_minus_pow_complement(beta_one(self.q, self.p_idle), x)
    }

    /// `b0e` from normalization.
    pub fn b0e(&self) -> T {
        let one = T::one();
        let q = self.q;
        let p = self.p;
        one / (self.eta * self.lambda
            + self.p_idle * (one - p)
            + (self.eta * self.mu + (one - q) * (one - p) / q) * self.gamma)
    }

    /// Closed-form `sum_k b(k)_e`.
    pub fn post_backoff_mass(&self, b0e: T, b0: T) -> T {
        let one = T::one();
        self.p_idle * (one - self.p) * b0e + (one - self.q) * (one - self.p) / self.q * b0
    }

    /// Closed-form `sum_k b(k)`.
    pub fn backoff_mass(&self, b0e: T, b0: T) -> T {
        self.eta * self.lambda * b0e + self.eta * self.mu * b0
    }
}

/// `beta(1) = 1 - (1 - q) P_idle`, computed without forming the product.
fn beta_one<T: Scalar>(q: T, p_idle: T) -> T {
    q + (T::one() - q) * (T::one() - p_idle)
}

/// `G(n) = sum_{k=1}^{n} (1 - y^k) / p`.
fn cumulative_geometric<T: Scalar>(p: T, n: usize) -> T {
    if p < T::lit(SUM_GUARD) {
        (1..=n).fold(T::zero(), |acc, k| acc + geometric_sum(p, k))
    } else {
        let y = T::one() - p;
        (p * T::count(n) - y * one_minus_pow_complement(p, n)) / (p * p)
    }
}

/// `K = sum_{j=1}^{Z-1} y^(j-1) x^(Z-j)`.
fn mixed_power_sum<T: Scalar>(x: T, y: T, z: usize) -> T {
    if (x - y).abs() < T::lit(SUM_GUARD) {
        (1..z).fold(T::zero(), |acc, j| {
            acc + y.powi(j as i32 - 1) * x.powi((z - j) as i32)
        })
    } else {
        x * (x.powi(z as i32 - 1) - y.powi(z as i32 - 1)) / (x - y)
    }
}

/// Closed-form coefficients. Requires `0 < q < 1`, `p < 1` and
/// `P_idle > 0`; `p = 0` is handled through its limit (`alpha(Z)/p -> Z`).
pub fn cell_closed_form<T: Scalar>(input: &CellChainInput<T>) -> Result<CellClosedFormTerms<T>> {
    input.check()?;
    let one = T::one();
    let q_raw = input.q.get();
    if q_raw == T::zero() || q_raw == one {
        return Err(CoexError::invalid(
            "q_C",
            "closed form needs 0 < q_C < 1; the endpoints are limit branches",
        ));
    }
    let p = input.p.get();
    if p >= one {
        return Err(CoexError::invalid("p_C", "closed form needs p_C < 1"));
    }
    let pi = input.p_idle.get();
    if pi <= T::zero() {
        return Err(CoexError::invalid(
            "P_idle_C",
            "closed form needs P_idle_C > 0",
        ));
    }
    let q = input.q.clamped_open();
    let z = input.z;
    let y = one - p;
    let x = (one - q) * pi;
    let b1 = beta_one(q, pi);
    let bz = one_minus_pow_complement(b1, z);

    let s = if b1 < T::lit(SUM_GUARD) {
        (1..z).fold(T::zero(), |acc, r| acc + one_minus_pow_complement(b1, r))
    } else {
        T::count(z) - bz / b1
    };
    let g_z = geometric_sum(p, z);
    let g_zm1 = geometric_sum(p, z - 1);
    let cum_z = cumulative_geometric(p, z);
    let cum_zm1 = cumulative_geometric(p, z - 1);
    let k_sum = mixed_power_sum(x, y, z);
    // sum_{j=1}^{Z-1} x^(Z-j) g(j)
    let weighted = if p < T::lit(SUM_GUARD) {
        (1..z).fold(T::zero(), |acc, j| {
            acc + x.powi((z - j) as i32) * geometric_sum(p, j)
        })
    } else {
        let x_tail = if b1 < T::lit(SUM_GUARD) {
            (1..z).fold(T::zero(), |acc, r| acc + x.powi(r as i32))
        } else {
            x * one_minus_pow_complement(b1, z - 1) / b1
        };
        (x_tail - y * k_sum) / p
    };

    let scale = q / bz;
    let f = scale * (g_zm1 - k_sum);
    let e = scale * (cum_zm1 - weighted);

    let eta = one / (pi * g_z);
    let lambda = q * pi * pi * (g_z * e - cum_z * f);
    let mu = pi * cum_z;
    let gamma = q * (one - pi * (one - p) + q * s / bz) / ((one - q) * (one - p));

    let terms = CellClosedFormTerms {
        q,
        p,
        p_idle: pi,
        z,
        eta,
        lambda,
        mu,
        gamma,
    };
    if [eta, lambda, mu, gamma].iter().any(|v| !v.is_finite()) {
        return Err(CoexError::NonFinite {
            quantity: "cellular closed-form terms",
        });
    }
    Ok(terms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellChainSolution<T> {
    /// Stationary mass of `(0)_e`.
    pub b0e: Probability<T>,
    /// Stationary mass of `(0)`.
    pub b0: Probability<T>,
    pub tau: Probability<T>,
}

/// Solves the chain, routing `q = 0` and `q = 1` to their limits.
pub fn cell_solve<T: Scalar>(input: &CellChainInput<T>) -> Result<CellChainSolution<T>> {
    input.check()?;
    let one = T::one();
    let q = input.q.get();
    if q == T::zero() {
        // every path drains into the (0)_e self-loop
        return Ok(CellChainSolution {
            b0e: Probability::one(),
            b0: Probability::zero(),
            tau: Probability::zero(),
        });
    }
    let p = input.p.get();
    if p >= one {
        return Err(CoexError::invalid(
            "p_C",
            "collision probability must be below 1",
        ));
    }
    if q == one {
        // post-backoff is transient; the backoff stage alone is the
        // saturated LBT chain with b0 = g(Z) / G(Z)
        let b0 = geometric_sum(p, input.z) / cumulative_geometric(p, input.z);
        return Ok(CellChainSolution {
            b0e: Probability::zero(),
            b0: Probability::saturating(b0),
            tau: Probability::saturating(b0),
        });
    }
    let terms = cell_closed_form(input)?;
    let b0e = terms.b0e();
    let b0 = terms.gamma * b0e;
    let tau = b0 + q * input.p_idle.get() * b0e;
    if !(b0e.is_finite() && b0.is_finite()) {
        return Err(CoexError::NonFinite { quantity: "b0e" });
    }
    Ok(CellChainSolution {
        b0e: Probability::saturating(b0e),
        b0: Probability::saturating(b0),
        tau: Probability::saturating(tau),
    })
}

pub fn cell_b0e<T: Scalar>(input: &CellChainInput<T>) -> Result<Probability<T>> {
    Ok(cell_solve(input)?.b0e)
}

/// `tau_C = b0 + q P_idle b0e`.
pub fn cell_tau<T: Scalar>(input: &CellChainInput<T>) -> Result<Probability<T>> {
    Ok(cell_solve(input)?.tau)
}

/// The 2Z x 2Z transition matrix, states ordered `(0)_e .. (Z-1)_e, (0) .. (Z-1)`,
/// rows indexed by the source state.
pub fn cell_transition_matrix<T: Scalar>(input: &CellChainInput<T>) -> Result<StochasticMatrix<T>> {
    input.check()?;
    let one = T::one();
    let q = input.q.get();
    let p = input.p.get();
    let pi = input.p_idle.get();
    let z = input.z;
    let zf = T::count(z);
    let mut m = StochasticMatrix::zeros(2 * z);
    let e = |k| input.post_backoff(k);
    let b = |k| input.backoff(k);

    // (k)_e, k >= 1: count down on idle, re-draw on busy; arrival picks the stage
    for k in 1..z {
        for l in 0..z {
            m.add(e(k), e(l), (one - q) * (one - pi) / zf);
            m.add(e(k), b(l), q * (one - pi) / zf);
        }
        m.add(e(k), e(k - 1), (one - q) * pi);
        m.add(e(k), b(k - 1), q * pi);
    }

    // (0)_e: wait for a packet, then send on idle or back off on busy/collision
    m.add(e(0), e(0), one - q);
    for k in 0..z {
        m.add(e(0), e(k), q * pi * (one - p) / zf);
        m.add(e(0), b(k), (p * q * pi + q * (one - pi)) / zf);
    }

    // (k), k >= 1
    for k in 1..z {
        for l in 0..z {
            m.add(b(k), b(l), p / zf);
        }
        m.add(b(k), b(k - 1), one - p);
    }

    // (0): transmit without further sensing
    for k in 0..z {
        m.add(b(0), b(k), (p + q * (one - p)) / zf);
        m.add(b(0), e(k), (one - q) * (one - p) / zf);
    }
    Ok(m)
}
