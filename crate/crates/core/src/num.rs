//! Scalar abstraction: everything numeric in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerics run on.
///
/// The supertraits cover what the algorithms actually use: IEEE arithmetic
/// with infinities/NaN ([`Float`]), conversions from literals and counters
/// ([`FromPrimitive`]), conversion back to `f64` for serialization
/// ([`ToPrimitive`]), and thread-safety so parameter sweeps can fan out.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only if the target type cannot
    /// represent any nearby value (never for finite f32/f64).
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    /// Converts a count (exact for the sizes used here).
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    /// Lossy view as `f64`, for serialization and reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `max(|a|, |b|)`-relative closeness test used throughout the test suites;
/// exact equality is accepted (covers zero).
pub fn approx_eq<T: Real>(a: T, b: T, rel_tol: T) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs()).max(T::one());
    (a - b).abs() <= rel_tol * scale
}
