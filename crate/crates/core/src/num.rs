//! Scalar abstraction shared by the geometric and statistical code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the whole engine is generic over.
///
/// Implemented for `f32` and `f64`. Random variates are always drawn as
/// `f64` and narrowed with [`Real::lit`].
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only for types that cannot represent it.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume<F: Real>(d: usize) -> F {
    match d {
        1 => F::lit(2.0),
        2 => F::PI(),
        3 => F::lit(4.0 / 3.0) * F::PI(),
        _ => {
            // ω_d = π^{d/2} / Γ(d/2 + 1), via the two-step recurrence.
            let mut omega = [F::one(), F::lit(2.0)];
            for k in 2..=d {
                let next = omega[0] * F::lit(2.0) * F::PI() / F::from_usize_lossy(k);
                omega = [omega[1], next];
            }
            omega[1]
        }
    }
}

/// Volume of the ball of radius `r` in `d` dimensions.
pub fn ball_volume<F: Real>(d: usize, r: F) -> F {
    unit_ball_volume::<F>(d) * r.powi(d as i32)
}
