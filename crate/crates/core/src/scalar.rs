//! Scalar abstractions.
//!
//! [`Scalar`] covers every number type the stoichiometric algebra can run
//! on, including exact rationals (`num::BigRational`), so conservation
//! identities can be checked without roundoff. [`Real`] adds the
//! transcendental functions needed by the equilibrium solver, the
//! eigensolver, the time integrators and the diagnostics.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ring-like scalar: exact rationals as well as floats.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Scalar + Float + Copy + Display + LowerExp + Send + Sync + Default + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this type.
    #[inline]
    fn count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    /// Lossy conversion used for error reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Tolerance floor: `max(requested, 16 eps)`, so that `f32` instances
    /// get a tolerance they can actually meet.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(16.0);
        let req = Self::lit(requested);
        if req > floor {
            req
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a slice.
pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Dot product of two equally long slices.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
