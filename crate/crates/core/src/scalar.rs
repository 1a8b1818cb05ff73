//! Scalar abstraction shared by the analytical modules.
//!
//! Every closed form in this crate is written against [`Scalar`], so the
//! same code runs in `f64` (the default used by the CLI) and `f32`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the analytical model.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `1 - (1 - d)^n` evaluated without cancellation for small `d`.
///
/// `d` is the complement of the base (for example the per-slot collision
/// probability), which is usually known more accurately than `1 - d`.
pub fn one_minus_pow_complement<T: Scalar>(d: T, n: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    if d >= T::one() {
        return T::one();
    }
    -(T::count(n) * (-d).ln_1p()).exp_m1()
}

/// `(1 - d)^n`, the probability that `n` independent trials all fail.
pub fn pow_complement<T: Scalar>(d: T, n: usize) -> T {
    if n == 0 {
        return T::one();
    }
    if d >= T::one() {
        return T::zero();
    }
    (T::count(n) * (-d).ln_1p()).exp()
}

/// Partial geometric sum `1 + r + ... + r^(n-1)` where `r = 1 - d`.
///
/// Equal to `(1 - r^n) / d` away from `d = 0` and to `n` at `d = 0`.
pub fn geometric_sum<T: Scalar>(d: T, n: usize) -> T {
    if d == T::zero() {
        return T::count(n);
    }
    one_minus_pow_complement(d, n) / d
}
