use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts a literal; every `f64` is representable (possibly rounded).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal converts to every Real")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln Σ exp(x_i)` without overflow. Returns `-inf` for an empty input.
pub(crate) fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let xs: Vec<T> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}
