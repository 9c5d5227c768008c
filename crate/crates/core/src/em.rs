//! The Bayesian fusion algorithm: state initialization, E-step expectations,
//! empirical-Bayes hyperparameter updates, the three half-quadratic-splitting
//! coordinate updates, and the outer driver [`fuse`].
//!
//! Working variables follow the residual parameterization `Y = U - V`
//! (infrared minus visible) and `X = I - V` (fused minus visible); the
//! regression unknown is `X` and the final image is `I = X + V`.

use crate::error::{FusionError, Result};
use crate::numerics::{gradient, soft_threshold, solve_h, GradientKernels};
use crate::plane::{GradientField, ImagePlane, IntensityScale};
use crate::scalar::Real;

/// Algorithm hyperparameters.
///
/// The defaults are the published settings: gradient penalty 0.5, splitting
/// penalty 0.001, 15 outer iterations, 2 inner sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams<T> {
    /// Strength of the gradient (total-variation) penalty.
    pub lambda_g: T,
    /// Quadratic coupling strength of the splitting surrogates.
    pub rho: T,
    /// Outer EM iterations.
    pub t_out: usize,
    /// Inner coordinate-descent sweeps per M-step.
    pub t_in: usize,
    /// Floor applied to the E-step expectations so reciprocals stay finite.
    pub eps: T,
    /// Intensity range the inputs are expressed in.
    pub scale: IntensityScale,
}

impl<T: Real> Default for FusionParams<T> {
    fn default() -> Self {
        Self {
            lambda_g: T::from_f64(0.5).unwrap(),
            rho: T::from_f64(0.001).unwrap(),
            t_out: 15,
            t_in: 2,
            eps: T::from_f64(1e-6).unwrap(),
            scale: IntensityScale::Unit,
        }
    }
}

impl<T: Real> FusionParams<T> {
    /// Checks the invariants: strictly positive reals, iteration counts >= 1.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_g > T::zero() && self.lambda_g.is_finite()) {
            return Err(FusionError::InvalidInput(format!(
                "lambda_g must be positive, got {}",
                self.lambda_g
            )));
        }
        if !(self.rho > T::zero() && self.rho.is_finite()) {
            return Err(FusionError::InvalidInput(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.eps > T::zero() && self.eps.is_finite()) {
            return Err(FusionError::InvalidInput(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.t_out < 1 {
            return Err(FusionError::InvalidInput("t_out must be >= 1".into()));
        }
        if self.t_in < 1 {
            return Err(FusionError::InvalidInput("t_in must be >= 1".into()));
        }
        Ok(())
    }
}

/// All mutable EM quantities.
///
/// After every E-step: `alpha, beta >= eps` element-wise, `w1 = sqrt(alpha)`,
/// `w2 = sqrt(beta)`, and `lambda, tau > 0`.
#[derive(Debug, Clone)]
pub struct EmState<T> {
    /// The unknown residual (fused minus visible).
    pub x: ImagePlane<T>,
    /// Splitting surrogate of `x`.
    pub h: ImagePlane<T>,
    /// Splitting surrogate of `grad(h)`.
    pub f: GradientField<T>,
    /// Element-wise square roots of `alpha`.
    pub w1: ImagePlane<T>,
    /// Element-wise square roots of `beta`.
    pub w2: ImagePlane<T>,
    /// Posterior expectations of the reciprocal noise variances.
    pub alpha: ImagePlane<T>,
    /// Posterior expectations of the reciprocal prior variances.
    pub beta: ImagePlane<T>,
    /// Noise scale hyperparameter.
    pub lambda: T,
    /// Prior scale hyperparameter.
    pub tau: T,
}

impl<T: Real> EmState<T> {
    /// Initialization: unit weights, zero surrogates, unit scales.
    pub fn init(y: &ImagePlane<T>) -> Result<Self> {
        let (h, w) = y.dims();
        Ok(Self {
            x: ImagePlane::zeros(h, w)?,
            h: ImagePlane::zeros(h, w)?,
            f: GradientField::zeros(h, w)?,
            w1: ImagePlane::ones(h, w)?,
            w2: ImagePlane::ones(h, w)?,
            alpha: ImagePlane::ones(h, w)?,
            beta: ImagePlane::ones(h, w)?,
            lambda: T::one(),
            tau: T::one(),
        })
    }

    /// E-step: refreshes `alpha`, `beta` (floored at `eps`) and the weight
    /// planes from the current residual. Leaves `x`, `h`, `f`, `lambda`,
    /// `tau` untouched.
    ///
    /// `alpha[ij] = sqrt(2 (y - x)^2 / lambda)`, `beta[ij] = sqrt(2 x^2 / tau)`.
    pub fn e_step(&mut self, y: &ImagePlane<T>, params: &FusionParams<T>) -> Result<()> {
        // Written so NaN also fails the check.
        let scales_positive = self.lambda > T::zero() && self.tau > T::zero();
        if !scales_positive {
            return Err(FusionError::InvalidState(format!(
                "scale parameters must stay positive (lambda={}, tau={})",
                self.lambda, self.tau
            )));
        }
        self.x.check_same_dims(y)?;
        let two = T::from_f64(2.0).unwrap();
        let (h, w) = y.dims();
        for i in 0..h {
            for j in 0..w {
                let r = y[(i, j)] - self.x[(i, j)];
                let a = (two * r * r / self.lambda).sqrt().max(params.eps);
                let x = self.x[(i, j)];
                let b = (two * x * x / self.tau).sqrt().max(params.eps);
                self.alpha[(i, j)] = a;
                self.beta[(i, j)] = b;
                self.w1[(i, j)] = a.sqrt();
                self.w2[(i, j)] = b.sqrt();
            }
        }
        Ok(())
    }

    /// Empirical-Bayes update of the scale hyperparameters from the current
    /// expectations:
    /// `lambda' = mean(1/alpha + lambda/2)`, `tau' = mean(1/beta + tau/2)`.
    ///
    /// Returns the new pair without mutating; the driver commits it. The sum
    /// runs in row-major order so results are reproducible.
    pub fn updated_hyperparams(&self) -> (T, T) {
        let n = T::from_usize(self.alpha.len()).unwrap();
        let half_lambda = self.lambda / T::from_f64(2.0).unwrap();
        let half_tau = self.tau / T::from_f64(2.0).unwrap();
        let mut sum_a = T::zero();
        for &a in self.alpha.iter() {
            sum_a += T::one() / a + half_lambda;
        }
        let mut sum_b = T::zero();
        for &b in self.beta.iter() {
            sum_b += T::one() / b + half_tau;
        }
        (sum_a / n, sum_b / n)
    }

    /// Reweighted least-squares update of the residual:
    /// `x = (2 w1^2 y + rho h) / (2 w1^2 + 2 w2^2 + rho)`.
    pub fn update_x(&mut self, y: &ImagePlane<T>, params: &FusionParams<T>) {
        let two = T::from_f64(2.0).unwrap();
        let (h, w) = y.dims();
        for i in 0..h {
            for j in 0..w {
                let a = self.w1[(i, j)] * self.w1[(i, j)];
                let b = self.w2[(i, j)] * self.w2[(i, j)];
                let numer = two * a * y[(i, j)] + params.rho * self.h[(i, j)];
                let denom = two * a + two * b + params.rho;
                self.x[(i, j)] = numer / denom;
            }
        }
    }

    /// Shrinkage update of the gradient surrogate:
    /// `f = soft_threshold(grad(h), lambda_g / rho)` element-wise.
    pub fn update_f(&mut self, params: &FusionParams<T>) -> Result<()> {
        let gamma = params.lambda_g / params.rho;
        if gamma < T::zero() || !gamma.is_finite() {
            return Err(FusionError::InvalidInput(format!(
                "shrinkage threshold lambda_g/rho must be finite and >= 0, got {gamma}"
            )));
        }
        let g = gradient(&self.h);
        self.f = GradientField {
            dx: g.dx.map(|v| soft_threshold(v, gamma).expect("checked non-negative")),
            dy: g.dy.map(|v| soft_threshold(v, gamma).expect("checked non-negative")),
        };
        Ok(())
    }

    /// One M-step: `t_in` sweeps of the three coordinate updates, each an
    /// exact minimizer of the splitting objective in its own block, in the
    /// order x, f, h.
    pub fn m_step(
        &mut self,
        y: &ImagePlane<T>,
        kernels: &GradientKernels<T>,
        params: &FusionParams<T>,
    ) -> Result<()> {
        for _ in 0..params.t_in {
            self.update_x(y, params);
            self.update_f(params)?;
            self.h = solve_h(&self.x, &self.f, kernels)?;
        }
        Ok(())
    }

    /// The splitting objective, evaluated with the current weights:
    /// `||w1.(x-y)||^2 + ||w2.x||^2 + lambda_g ||f||_1 + rho/2 (||f -
    /// grad(h)||^2 + ||h - x||^2)`. Used by descent tests.
    pub fn splitting_objective(&self, y: &ImagePlane<T>, params: &FusionParams<T>) -> T {
        let mut quad = T::zero();
        for idx in 0..y.len() {
            let x = self.x.as_slice()[idx];
            let r1 = self.w1.as_slice()[idx] * (x - y.as_slice()[idx]);
            let r2 = self.w2.as_slice()[idx] * x;
            quad += r1 * r1 + r2 * r2;
        }
        let mut l1 = T::zero();
        for &v in self.f.dx.iter().chain(self.f.dy.iter()) {
            l1 += v.abs();
        }
        let g = gradient(&self.h);
        let mut coupling = T::zero();
        for idx in 0..y.len() {
            let dfx = self.f.dx.as_slice()[idx] - g.dx.as_slice()[idx];
            let dfy = self.f.dy.as_slice()[idx] - g.dy.as_slice()[idx];
            let dh = self.h.as_slice()[idx] - self.x.as_slice()[idx];
            coupling += dfx * dfx + dfy * dfy + dh * dh;
        }
        let half = T::from_f64(0.5).unwrap();
        quad + params.lambda_g * l1 + half * params.rho * coupling
    }
}

/// Fuses an infrared/visible pair into a single image.
///
/// Runs `t_out` outer iterations of (M-step, E-step, hyperparameter update)
/// on the residual `y = u - v`, then returns `x + v` clamped to the declared
/// intensity range. Deterministic: identical inputs and parameters produce
/// bit-identical output.
pub fn fuse<T: Real>(
    u: &ImagePlane<T>,
    v: &ImagePlane<T>,
    params: &FusionParams<T>,
) -> Result<ImagePlane<T>> {
    params.validate()?;
    u.check_same_dims(v)?;
    let hi = params.scale.range_max::<T>();
    if !u.within(T::zero(), hi) || !v.within(T::zero(), hi) {
        return Err(FusionError::InvalidInput(format!(
            "input intensities outside declared range [0, {hi}]"
        )));
    }

    let y = u.zip_map(v, |a, b| a - b)?;
    let (h, w) = y.dims();
    let kernels = GradientKernels::for_shape(h, w)?;
    let mut state = EmState::init(&y)?;
    for _ in 0..params.t_out {
        state.m_step(&y, &kernels, params)?;
        state.e_step(&y, params)?;
        let (lambda, tau) = state.updated_hyperparams();
        state.lambda = lambda;
        state.tau = tau;
    }

    state
        .x
        .zip_map(v, |x, vis| (x + vis).max(T::zero()).min(hi))
}
