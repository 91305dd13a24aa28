//! Scalar abstraction shared by every numeric module.
//!
//! The solvers are written against [`Scalar`] so they run in `f32` or `f64`.
//! Constants are spelled as `f64` literals and converted with [`Scalar::lit`].

use num_traits::{Float, FromPrimitive, NumCast};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for the finite literals used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance of `x`, floored at a small multiple of machine epsilon so
    /// that `f64` thresholds stay meaningful in lower precision.
    #[inline]
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Pairwise (cascade) summation; the result depends only on the input order.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sorts and merges breakpoints in `[0, 1]` that are closer than `eps`.
pub(crate) fn merge_breakpoints<T: Scalar>(mut points: Vec<T>, eps: T) -> Vec<T> {
    points.retain(|p| p.is_finite());
    for p in points.iter_mut() {
        *p = p.max(T::zero()).min(T::one());
    }
    points.push(T::zero());
    points.push(T::one());
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let mut out: Vec<T> = Vec::with_capacity(points.len());
    for p in points {
        match out.last() {
            Some(&last) if p - last <= eps => {}
            _ => out.push(p),
        }
    }
    // keep 1 as the exact right end
    if let Some(last) = out.last_mut() {
        *last = T::one();
    }
    if out.len() == 1 {
        out.insert(0, T::zero());
    }
    out
}
