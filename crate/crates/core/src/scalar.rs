//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the library computes with: `f32` or `f64`.
///
/// The associated constants are the default numerical tolerances for the
/// scalar's precision. Every operation that takes an explicit tolerance
/// accepts any value; these are only the defaults.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Normalization tolerance for probability vectors and channels.
    const VALIDATION_TOL: f64;
    /// Entries above this value count as support.
    const SUPPORT_EPS: f64;
    /// Hermiticity / trace / positivity tolerance for density matrices.
    const STATE_TOL: f64;
    /// Tolerance on entropy equalities used by the classifier.
    const ENTROPY_TOL: f64;
    /// Eigenvalues below this are treated as zero before taking logarithms.
    const EIG_CLIP: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f64 {
    const VALIDATION_TOL: f64 = 1e-12;
    const SUPPORT_EPS: f64 = 1e-12;
    const STATE_TOL: f64 = 1e-10;
    const ENTROPY_TOL: f64 = 1e-9;
    const EIG_CLIP: f64 = 1e-12;
}

impl Real for f32 {
    const VALIDATION_TOL: f64 = 1e-5;
    const SUPPORT_EPS: f64 = 1e-6;
    const STATE_TOL: f64 = 1e-4;
    const ENTROPY_TOL: f64 = 1e-4;
    const EIG_CLIP: f64 = 1e-6;
}

/// `-x log2 x` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn plogp<R: Real>(x: R) -> R {
    if x <= R::zero() {
        R::zero()
    } else {
        -x * x.log2()
    }
}
