//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FloatConst, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point type the surrogates, kernels and networks are generic over.
///
/// Implemented for `f32` and `f64`. Literals are written through [`Scalar::lit`]
/// so generic code reads close to the concrete formulas.
pub trait Scalar: RealField + Copy + ToPrimitive + FloatConst + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Standard normal draw. Always sampled in `f64` so that an `f32` and an
    /// `f64` model consume the random stream identically.
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Self::lit(z)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
