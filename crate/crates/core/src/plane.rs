//! Core pixel containers: [`ImagePlane`] for single-channel images and
//! intermediate quantities, [`GradientField`] for two-direction forward
//! differences.

use std::ops::{Index, IndexMut};

use crate::error::{FusionError, Result};
use crate::scalar::Real;

/// Working intensity range of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityScale {
    /// Intensities in `[0, 1]`.
    Unit,
    /// Intensities in `[0, 255]`.
    Byte,
}

impl IntensityScale {
    /// Upper end of the valid intensity range (`L`, the dynamic range).
    pub fn range_max<T: Real>(self) -> T {
        match self {
            IntensityScale::Unit => T::one(),
            IntensityScale::Byte => T::from_f64(255.0).unwrap(),
        }
    }
}

/// An `h x w` matrix of real values stored row-major.
///
/// Invariants (enforced by constructors and preserved by operations):
/// every entry is finite, and both dimensions are at least 2 so the
/// gradient operators always have two samples per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> ImagePlane<T> {
    /// Builds a plane from row-major data, validating the invariants.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(FusionError::InvalidInput(format!(
                "plane dimensions must be at least 2x2, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(FusionError::InvalidInput(format!(
                "data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::InvalidInput(
                "plane data contains NaN or infinity".into(),
            ));
        }
        Ok(Self { height, width, data })
    }

    /// Builds a plane where every pixel holds `value`.
    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::from_vec(height, width, vec![value; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, T::zero())
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, T::one())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    /// Element-wise map into a new plane.
    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two planes of identical dimensions.
    pub fn zip_map<F: Fn(T, T) -> T>(&self, other: &Self, f: F) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            height: self.height,
            width: self.width,
            data,
        })
    }

    pub(crate) fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(FusionError::InvalidInput(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// True when every entry lies in `[lo, hi]`.
    pub fn within(&self, lo: T, hi: T) -> bool {
        self.data.iter().all(|&v| v >= lo && v <= hi)
    }
}

impl<T: Real> Index<(usize, usize)> for ImagePlane<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.width + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ImagePlane<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.width + j]
    }
}

/// Horizontal and vertical forward differences of a plane.
///
/// `dx` and `dy` always share the source plane's dimensions; the gradient of
/// a constant plane is the all-zero field.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    pub dx: ImagePlane<T>,
    pub dy: ImagePlane<T>,
}

impl<T: Real> GradientField<T> {
    pub fn new(dx: ImagePlane<T>, dy: ImagePlane<T>) -> Result<Self> {
        dx.check_same_dims(&dy)?;
        Ok(Self { dx, dy })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Ok(Self {
            dx: ImagePlane::zeros(height, width)?,
            dy: ImagePlane::zeros(height, width)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dx.dims()
    }

    /// Applies `f` to both channels.
    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Self {
            dx: self.dx.map(&f),
            dy: self.dy.map(&f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_planes_smaller_than_2x2() {
        assert!(ImagePlane::<f64>::zeros(1, 4).is_err());
        assert!(ImagePlane::<f64>::zeros(4, 1).is_err());
        assert!(ImagePlane::<f64>::zeros(2, 2).is_ok());
    }

    #[test]
    fn rejects_non_finite_data() {
        assert!(ImagePlane::from_vec(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(ImagePlane::from_vec(2, 2, vec![0.0, 1.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(ImagePlane::from_vec(2, 3, vec![0.0f64; 5]).is_err());
    }

    #[test]
    fn index_is_row_major() {
        let p = ImagePlane::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(p[(0, 2)], 2.0);
        assert_eq!(p[(1, 0)], 3.0);
    }

    #[test]
    fn gradient_field_needs_matching_channels() {
        let a = ImagePlane::<f64>::zeros(2, 2).unwrap();
        let b = ImagePlane::<f64>::zeros(2, 3).unwrap();
        assert!(GradientField::new(a, b).is_err());
    }

    #[test]
    fn scale_range_max() {
        assert_eq!(IntensityScale::Unit.range_max::<f64>(), 1.0);
        assert_eq!(IntensityScale::Byte.range_max::<f32>(), 255.0);
    }
}
