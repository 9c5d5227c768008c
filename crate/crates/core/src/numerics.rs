//! Self-contained 2D numeric kernels: periodic forward-difference gradients,
//! their adjoint, element-wise soft-thresholding, and the frequency-domain
//! solver for the quadratic surrogate subproblem.
//!
//! All boundary handling is periodic (circular). That choice makes the
//! frequency-domain division in [`solve_h`] an exact minimizer instead of an
//! approximation, and it is pinned by the adjointness and dense-solve tests.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{FusionError, Result};
use crate::plane::{GradientField, ImagePlane};
use crate::scalar::Real;

/// Forward differences with periodic wrap:
/// `dx[i][j] = p[i][(j+1) mod w] - p[i][j]`, `dy[i][j] = p[(i+1) mod h][j] - p[i][j]`.
pub fn gradient<T: Real>(p: &ImagePlane<T>) -> GradientField<T> {
    let (h, w) = p.dims();
    let mut dx = ImagePlane::zeros(h, w).expect("plane invariants hold");
    let mut dy = ImagePlane::zeros(h, w).expect("plane invariants hold");
    for i in 0..h {
        for j in 0..w {
            let right = p[(i, (j + 1) % w)];
            let below = p[((i + 1) % h, j)];
            let here = p[(i, j)];
            dx[(i, j)] = right - here;
            dy[(i, j)] = below - here;
        }
    }
    GradientField { dx, dy }
}

/// Adjoint of [`gradient`]: the unique operator with
/// `<grad(p), f> = <p, gradient_adjoint(f)>` under periodic boundaries.
///
/// Needed to state the normal equations of the H subproblem,
/// `(I + G^T G) H = X + G^T F`, in the spatial domain.
pub fn gradient_adjoint<T: Real>(f: &GradientField<T>) -> ImagePlane<T> {
    let (h, w) = f.dims();
    let mut out = ImagePlane::zeros(h, w).expect("plane invariants hold");
    for i in 0..h {
        for j in 0..w {
            let left = f.dx[(i, (j + w - 1) % w)];
            let above = f.dy[((i + h - 1) % h, j)];
            out[(i, j)] = (left - f.dx[(i, j)]) + (above - f.dy[(i, j)]);
        }
    }
    out
}

/// `sign(v) * max(|v| - gamma, 0)`; the exact minimizer of
/// `gamma*|f| + (f - v)^2 / 2`.
pub fn soft_threshold<T: Real>(v: T, gamma: T) -> Result<T> {
    if gamma < T::zero() {
        return Err(FusionError::InvalidInput(format!(
            "soft threshold requires gamma >= 0, got {gamma}"
        )));
    }
    let shrunk = v.abs() - gamma;
    if shrunk > T::zero() {
        Ok(v.signum() * shrunk)
    } else {
        Ok(T::zero())
    }
}

/// The two forward-difference kernels embedded into an `h x w` plane
/// (origin at index `(0,0)`, wrap-around tap at the far edge) together with
/// their cached discrete Fourier transforms.
///
/// Circular convolution with `kx`/`ky` reproduces [`gradient`]
/// element-for-element; the cached transforms drive [`solve_h`].
#[derive(Debug, Clone)]
pub struct GradientKernels<T> {
    height: usize,
    width: usize,
    kx: ImagePlane<T>,
    ky: ImagePlane<T>,
    kx_otf: Vec<Complex<T>>,
    ky_otf: Vec<Complex<T>>,
}

impl<T: Real> GradientKernels<T> {
    /// Builds the kernels and their transforms for planes of shape `h x w`.
    pub fn for_shape(height: usize, width: usize) -> Result<Self> {
        let mut kx = ImagePlane::zeros(height, width)?;
        let mut ky = ImagePlane::zeros(height, width)?;
        // Circular convolution with these taps gives p[.,j+1] - p[.,j]:
        // the +1 tap sits at wrap-around index -1.
        kx[(0, 0)] = -T::one();
        kx[(0, width - 1)] = T::one();
        ky[(0, 0)] = -T::one();
        ky[(height - 1, 0)] = T::one();

        let mut planner = FftPlanner::new();
        let kx_otf = fft2_forward(&mut planner, height, width, kx.as_slice());
        let ky_otf = fft2_forward(&mut planner, height, width, ky.as_slice());
        Ok(Self {
            height,
            width,
            kx,
            ky,
            kx_otf,
            ky_otf,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Horizontal-difference kernel plane (mostly for tests).
    pub fn kx(&self) -> &ImagePlane<T> {
        &self.kx
    }

    /// Vertical-difference kernel plane.
    pub fn ky(&self) -> &ImagePlane<T> {
        &self.ky
    }
}

/// Exact minimizer of `||H - X||_2^2 + ||F - grad(H)||_2^2`.
///
/// Solved in the frequency domain: the transform of each difference kernel
/// multiplies the transform of H, so the normal equations diagonalize into
/// `H^ = (X^ + conj(Kx^).Fx^ + conj(Ky^).Fy^) / (1 + |Kx^|^2 + |Ky^|^2)`.
/// Both gradient directions contribute to numerator and denominator. The
/// imaginary residue of the inverse transform is checked against
/// [`Real::fft_imag_tol`] and then discarded.
pub fn solve_h<T: Real>(
    x: &ImagePlane<T>,
    f: &GradientField<T>,
    kernels: &GradientKernels<T>,
) -> Result<ImagePlane<T>> {
    let (h, w) = x.dims();
    if f.dims() != (h, w) {
        return Err(FusionError::InvalidInput(format!(
            "field dimensions {:?} do not match plane {:?}",
            f.dims(),
            (h, w)
        )));
    }
    if kernels.dims() != (h, w) {
        return Err(FusionError::InvalidInput(format!(
            "kernel dimensions {:?} do not match plane {:?}",
            kernels.dims(),
            (h, w)
        )));
    }

    let mut planner = FftPlanner::new();
    let x_hat = fft2_forward(&mut planner, h, w, x.as_slice());
    let fx_hat = fft2_forward(&mut planner, h, w, f.dx.as_slice());
    let fy_hat = fft2_forward(&mut planner, h, w, f.dy.as_slice());

    let one = T::one();
    let mut h_hat = Vec::with_capacity(h * w);
    for idx in 0..h * w {
        let kx = kernels.kx_otf[idx];
        let ky = kernels.ky_otf[idx];
        let numer = x_hat[idx] + kx.conj() * fx_hat[idx] + ky.conj() * fy_hat[idx];
        let denom = one + kx.norm_sqr() + ky.norm_sqr();
        h_hat.push(numer / denom);
    }

    let spatial = fft2_inverse(&mut planner, h, w, h_hat);

    let mut residue = T::zero();
    let mut data = Vec::with_capacity(h * w);
    for c in spatial {
        residue = residue.max(c.im.abs());
        data.push(c.re);
    }
    if residue >= T::fft_imag_tol() {
        return Err(FusionError::InternalConsistency(format!(
            "imaginary residue {residue} after inverse transform exceeds tolerance"
        )));
    }
    ImagePlane::from_vec(h, w, data)
}

/// Unnormalized 2D DFT of real row-major data (rows, then columns).
fn fft2_forward<T: Real>(
    planner: &mut FftPlanner<T>,
    height: usize,
    width: usize,
    data: &[T],
) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = data.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft2_in_place(planner, height, width, &mut buf, rustfft::FftDirection::Forward);
    buf
}

/// Inverse 2D DFT, normalized by `1/(h*w)`.
fn fft2_inverse<T: Real>(
    planner: &mut FftPlanner<T>,
    height: usize,
    width: usize,
    mut buf: Vec<Complex<T>>,
) -> Vec<Complex<T>> {
    fft2_in_place(planner, height, width, &mut buf, rustfft::FftDirection::Inverse);
    let norm = T::one() / T::from_usize(height * width).unwrap();
    for c in &mut buf {
        *c *= norm;
    }
    buf
}

fn fft2_in_place<T: Real>(
    planner: &mut FftPlanner<T>,
    height: usize,
    width: usize,
    buf: &mut [Complex<T>],
    direction: rustfft::FftDirection,
) {
    debug_assert_eq!(buf.len(), height * width);
    let zero = Complex::new(T::zero(), T::zero());
    let row_fft = planner.plan_fft(width, direction);
    let mut scratch = vec![zero; row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let col_fft = planner.plan_fft(height, direction);
    scratch.resize(col_fft.get_inplace_scratch_len(), zero);
    let mut column = vec![zero; height];
    for j in 0..width {
        for i in 0..height {
            column[i] = buf[i * width + j];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for i in 0..height {
            buf[i * width + j] = column[i];
        }
    }
}
