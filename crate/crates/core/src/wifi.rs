//! Non-saturated 802.11 DCF chain of a single Wi-Fi AP.
//!
//! The chain has a post-backoff stage `(0,k)_e`, `k < W0`, entered when the
//! buffer is empty after a success, and backoff stages `(i,k)`, `k < 2^i W0`,
//! `i <= m`. The closed forms below give the stationary mass of `(0,0)_e` and
//! the per-slot attempt probability; [`wifi_transition_matrix`] builds the
//! same chain explicitly for verification.

use crate::config::Probability;
use crate::error::{CoexError, Result};
use crate::markov::StochasticMatrix;
use crate::scalar::{one_minus_pow_complement, Scalar};

/// Below this distance from `p = 1/2` the stage sum is evaluated term by term.
const HALF_P_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WifiChainInput<T> {
    /// Packet availability per chain transition.
    pub q: Probability<T>,
    /// Conditional collision probability.
    pub p: Probability<T>,
    /// Probability the channel is idle while this AP is silent.
    pub p_idle: Probability<T>,
    pub w0: usize,
    pub max_stage: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WifiChainSolution<T> {
    /// Stationary mass of the empty-buffer head state `(0,0)_e`.
    pub b00e: Probability<T>,
    /// Attempt probability in a randomly chosen slot.
    pub tau: Probability<T>,
}

impl<T: Scalar> WifiChainInput<T> {
    pub fn new(q: T, p: T, p_idle: T, w0: usize, max_stage: usize) -> Result<Self> {
        let input = WifiChainInput {
            q: Probability::new(q)?,
            p: Probability::new(p)?,
            p_idle: Probability::new(p_idle)?,
            w0,
            max_stage,
        };
        input.check()?;
        Ok(input)
    }

    fn check(&self) -> Result<()> {
        if self.w0 < 2 {
            return Err(CoexError::invalid("W0", "must be at least 2"));
        }
        if self.max_stage > 30 {
            return Err(CoexError::invalid("m", "too many backoff stages"));
        }
        if self.p.get() >= T::one() {
            return Err(CoexError::invalid(
                "p_W",
                "collision probability 1 leaves the backoff chain without a recurrent class",
            ));
        }
        Ok(())
    }

    fn window(&self, stage: usize) -> usize {
        self.w0 << stage
    }
}

/// `2 W0 (1 - p - p (2p)^(m-1)) / (1 - 2p) + 1`.
///
/// The ratio has a removable singularity at `p = 1/2`; it equals
/// `W0 (1 + sum_{i<m} (2p)^i) + 1`, which is used near the singular point.
fn stage_factor<T: Scalar>(p: T, w0: usize, m: usize) -> T {
    let two = T::lit(2.0);
    let w0 = T::count(w0);
    let s = two * p;
    if (T::one() - s).abs() < T::lit(HALF_P_GUARD) {
        let mut acc = T::zero();
        let mut term = T::one();
        for _ in 0..m {
            acc = acc + term;
            term = term * s;
        }
        w0 * (T::one() + acc) + T::one()
    } else {
        // p (2p)^(m-1) written as (2p)^m / 2 so that m = 0 stays finite at p = 0
        let num = T::one() - p - s.powi(m as i32) / two;
        two * w0 * num / (T::one() - s) + T::one()
    }
}

/// Saturated attempt probability: stage `i` is entered with relative weight
/// `p^i` (and `p^m / (1-p)` for the last stage) and holds `(W_i + 1) / 2`
/// slots on average, one of which is an attempt.
fn saturated_tau<T: Scalar>(input: &WifiChainInput<T>) -> T {
    let p = input.p.get();
    let m = input.max_stage;
    let mut attempts = T::zero();
    let mut slots = T::zero();
    let mut weight = T::one();
    for i in 0..=m {
        let w = if i == m {
            weight / (T::one() - p)
        } else {
            weight
        };
        attempts = attempts + w;
        slots = slots + w * (T::count(input.window(i)) + T::one()) / T::lit(2.0);
        weight = weight * p;
    }
    attempts / slots
}

/// Stationary probability of `(0,0)_e`.
///
/// `q = 0` returns 1 (all mass on the idle head) and `q = 1` returns 0 (the
/// post-backoff stage is transient).
pub fn wifi_b00e<T: Scalar>(input: &WifiChainInput<T>) -> Result<Probability<T>> {
    input.check()?;
    if input.q.get() == T::zero() {
        return Ok(Probability::one());
    }
    if input.q.get() == T::one() {
        return Ok(Probability::zero());
    }
    let one = T::one();
    let two = T::lit(2.0);
    let q = input.q.clamped_open();
    let p = input.p.get();
    let pi = input.p_idle.get();
    let w0 = T::count(input.w0);

    let r = one_minus_pow_complement(q, input.w0);
    let q2 = q * q;
    let head = (one - q) + q2 * w0 * (w0 + one) / (two * r);
    let post = q * (w0 + one) / (two * (one - q))
        * (q2 * w0 / r + (one - pi) * (one - q) - q * pi * (one - p));
    let backoff = p * q2 / (two * (one - q) * (one - p))
        * (w0 / r - (one - p) * pi)
        * stage_factor(p, input.w0, input.max_stage);
    let b = one / (head + post + backoff);
    if !b.is_finite() {
        return Err(CoexError::NonFinite { quantity: "b00e" });
    }
    Ok(Probability::saturating(b))
}

/// Attempt probability `tau_W = q P_idle b00e + sum_i b(i,0)`.
pub fn wifi_tau<T: Scalar>(input: &WifiChainInput<T>) -> Result<Probability<T>> {
    Ok(wifi_solve(input)?.tau)
}

/// Both chain outputs at once.
pub fn wifi_solve<T: Scalar>(input: &WifiChainInput<T>) -> Result<WifiChainSolution<T>> {
    input.check()?;
    let b00e = wifi_b00e(input)?;
    let q_raw = input.q.get();
    if q_raw == T::zero() {
        return Ok(WifiChainSolution {
            b00e,
            tau: Probability::zero(),
        });
    }
    if q_raw == T::one() {
        return Ok(WifiChainSolution {
            b00e,
            tau: Probability::saturating(saturated_tau(input)),
        });
    }
    let one = T::one();
    let q = input.q.clamped_open();
    let p = input.p.get();
    let pi = input.p_idle.get();
    let w0 = T::count(input.w0);
    let r = one_minus_pow_complement(q, input.w0);
    let q2 = q * q;
    let tau = b00e.get() * (q2 * w0 / ((one - p) * (one - q) * r) - q2 * pi / (one - q));
    if !tau.is_finite() {
        return Err(CoexError::NonFinite { quantity: "tau_W" });
    }
    Ok(WifiChainSolution {
        b00e,
        tau: Probability::saturating(tau),
    })
}

/// State indices of the explicit Wi-Fi chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WifiStates {
    w0: usize,
    offsets: Vec<usize>,
    total: usize,
}

impl WifiStates {
    pub fn new(w0: usize, max_stage: usize) -> Self {
        let mut offsets = Vec::with_capacity(max_stage + 1);
        let mut next = w0;
        for i in 0..=max_stage {
            offsets.push(next);
            next += w0 << i;
        }
        WifiStates {
            w0,
            offsets,
            total: next,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Index of `(0,k)_e`.
    pub fn post_backoff(&self, k: usize) -> usize {
        debug_assert!(k < self.w0);
        k
    }

    /// Index of `(i,k)`.
    pub fn backoff(&self, stage: usize, k: usize) -> usize {
        debug_assert!(k < self.w0 << stage);
        self.offsets[stage] + k
    }

    pub fn stages(&self) -> usize {
        self.offsets.len()
    }

    pub fn label(&self, idx: usize) -> String {
        if idx < self.w0 {
            return format!("(0,{idx})e");
        }
        let stage = self
            .offsets
            .iter()
            .rposition(|&o| o <= idx)
            .expect("index past the post-backoff stage");
        format!("({stage},{})", idx - self.offsets[stage])
    }
}

/// Explicit transition matrix of the Wi-Fi chain.
///
/// Post-backoff states count down once per slot and move to the matching
/// backoff state when a packet is present. From `(0,0)_e` a present packet
/// is sent at once if the channel is idle (success: new post-backoff counter;
/// collision: stage 1) or joins stage 0 if the channel is busy. Backoff
/// counters count down once per slot; at `k = 0` the AP transmits, moving to
/// stage `min(i+1, m)` on collision and to stage 0 or post-backoff on success
/// depending on whether another packet is waiting.
pub fn wifi_transition_matrix<T: Scalar>(
    input: &WifiChainInput<T>,
) -> Result<(StochasticMatrix<T>, WifiStates)> {
    input.check()?;
    let one = T::one();
    let q = input.q.get();
    let p = input.p.get();
    let pi = input.p_idle.get();
    let w0 = input.w0;
    let m = input.max_stage;
    let states = WifiStates::new(w0, m);
    let mut mat = StochasticMatrix::zeros(states.len());
    let uniform = |w: usize| one / T::count(w);

    for k in 1..w0 {
        let from = states.post_backoff(k);
        mat.add(from, states.post_backoff(k - 1), one - q);
        mat.add(from, states.backoff(0, k - 1), q);
    }

    let head = states.post_backoff(0);
    let first_retry = m.min(1);
    mat.add(head, head, one - q);
    for k in 0..w0 {
        mat.add(
            head,
            states.post_backoff(k),
            q * pi * (one - p) * uniform(w0),
        );
        mat.add(head, states.backoff(0, k), q * (one - pi) * uniform(w0));
    }
    let w1 = input.window(first_retry);
    for k in 0..w1 {
        mat.add(
            head,
            states.backoff(first_retry, k),
            q * pi * p * uniform(w1),
        );
    }

    for i in 0..=m {
        for k in 1..input.window(i) {
            mat.add(states.backoff(i, k), states.backoff(i, k - 1), one);
        }
        let from = states.backoff(i, 0);
        for k in 0..w0 {
            mat.add(
                from,
                states.post_backoff(k),
                (one - p) * (one - q) * uniform(w0),
            );
            mat.add(from, states.backoff(0, k), (one - p) * q * uniform(w0));
        }
        let next = (i + 1).min(m);
        let wn = input.window(next);
        for k in 0..wn {
            mat.add(from, states.backoff(next, k), p * uniform(wn));
        }
    }
    Ok((mat, states))
}
