//! Floating-point abstraction: every numeric routine in this crate is generic
//! over [`Real`], instantiated as `f32` or `f64`.

use std::fmt::Display;
use std::iter::Sum;

use num_traits::{Float, NumAssign};
use rustfft::FftNum;

/// Scalar type the fusion pipeline runs on.
///
/// `FftNum` brings `FromPrimitive`, `Signed`, `Send + Sync` and lets the same
/// code drive the frequency-domain solver for both widths.
pub trait Real: Float + FftNum + NumAssign + Sum + Display {
    /// Largest imaginary residue tolerated after an inverse transform of
    /// real-valued data; anything above it is flagged as an internal error.
    /// Scaled to the mantissa width of the type.
    fn fft_imag_tol() -> Self;
}

impl Real for f32 {
    fn fft_imag_tol() -> f32 {
        1e-3
    }
}

impl Real for f64 {
    fn fft_imag_tol() -> f64 {
        1e-9
    }
}
