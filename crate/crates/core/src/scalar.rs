//! Floating-point scalar abstraction: everything numeric in this crate is
//! generic over [`Scalar`], with `f64` as the default used by the concrete
//! aliases at the crate root.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display, LowerExp};

/// Real scalar type usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant into this scalar type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant converts to scalar")
    }

    /// Widen to `f64` (lossless for f32/f64).
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Draw one standard-normal sample.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}
