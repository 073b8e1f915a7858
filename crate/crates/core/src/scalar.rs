//! Scalar abstraction shared by every module.
//!
//! All numerical code is written against [`Real`], which is implemented for
//! `f32` and `f64`. Evaluation on the unit circle happens in
//! [`Complex<T>`](num_complex::Complex).

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar used throughout the crate.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + LowerExp + Default
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64`, used for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon.
    fn eps() -> Self {
        Self::default_epsilon()
    }

    /// The larger of `x` and a multiple of machine epsilon. Used to keep
    /// f64-calibrated tolerances meaningful in single precision.
    fn tol_floor(x: f64, eps_multiple: f64) -> Self {
        let t = Self::lit(x);
        let floor = Self::eps() * Self::lit(eps_multiple);
        if t > floor {
            t
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Dense complex matrix.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Lifts a real matrix into the complex field.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// Frobenius-type pairing `tr[X · conj(Y)^T] = Σ X_ab · conj(Y_ab)`.
pub fn frobenius_pairing<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> Complex<T> {
    x.iter()
        .zip(y.iter())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * b.conj())
}

/// Largest entry magnitude of a real matrix.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Modulus `|z|` without requiring `num_traits::Float`.
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Largest entry modulus of a complex matrix.
pub fn max_modulus<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(modulus(*x)))
}

/// Point `exp(2πi k / n)` on the unit circle.
pub fn circle_node<T: Real>(k: usize, n: usize) -> Complex<T> {
    let angle = T::two_pi() * T::lit(k as f64) / T::lit(n as f64);
    Complex::new(angle.cos(), angle.sin())
}
