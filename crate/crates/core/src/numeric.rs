//! Scalar abstraction so the model runs in f32 for training and f64 for
//! finite-difference gradient checks.

use num_traits::{Float, NumAssign, NumCast};

/// Concrete f64 math routed through `num_traits::Float`, so no_std builds
/// pick up the libm implementations.
pub mod f64x {
    use num_traits::Float;

    pub fn sqrt(x: f64) -> f64 {
        Float::sqrt(x)
    }

    pub fn ln(x: f64) -> f64 {
        Float::ln(x)
    }

    pub fn cos(x: f64) -> f64 {
        Float::cos(x)
    }

    pub fn sin(x: f64) -> f64 {
        Float::sin(x)
    }

    pub fn powf(x: f64, y: f64) -> f64 {
        Float::powf(x, y)
    }

    pub fn powi(x: f64, n: i32) -> f64 {
        Float::powi(x, n)
    }
}

/// Floating-point scalar usable by the model. Implemented for `f32` and
/// `f64`; the `gemm` hook dispatches to the matching matrixmultiply kernel.
pub trait Real:
    Float + NumAssign + NumCast + core::fmt::Debug + core::fmt::Display + Send + Sync + 'static
{
    /// C := alpha * A(m,k) * B(k,n) + beta * C(m,n), arbitrary strides.
    ///
    /// # Safety
    /// Pointers must be valid for the given dimensions and strides, and the
    /// C region must not alias A or B.
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 conversion")
    }

    /// Widening conversion (named to avoid clashing with
    /// `ToPrimitive::to_f64`).
    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("to f64")
    }
}

impl Real for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}
