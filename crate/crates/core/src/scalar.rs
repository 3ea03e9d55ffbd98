//! Scalar plumbing shared by every module.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is generic over (`f64` and `f32` in practice).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

/// Complex entry type.
pub type C<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(lit(re), lit(im))
}

#[inline]
pub fn one<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn zero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

/// Orthonormality tolerance for frames: 1e-10 in double precision, relaxed for
/// lower-precision scalars.
pub fn frame_tol<T: Real>() -> T {
    let eps = T::default_epsilon();
    let scaled = eps * lit::<T>(1e3);
    let base = lit::<T>(1e-10);
    if scaled > base {
        scaled
    } else {
        base
    }
}
