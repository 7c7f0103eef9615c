//! Floating point abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftNum;

/// Real scalar the simulation code is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Euler–Mascheroni constant.
    const EULER_GAMMA: Self;
    /// Machine epsilon of the type.
    const EPS: Self;

    /// Converts an `f64` literal. Panics only for values not representable at all (never for finite input).
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on `[0, 1)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn nat(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EULER_GAMMA: Self = 0.577_215_664_901_532_9;
            const EPS: Self = <$t>::EPSILON;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            #[inline]
            fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Planar point.
pub type Point2<T> = [T; 2];

#[inline]
pub(crate) fn dist2<T: Real>(a: Point2<T>, b: Point2<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}
