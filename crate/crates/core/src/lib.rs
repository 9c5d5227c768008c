//! Fusion of pre-registered infrared/visible image pairs.
//!
//! The fused image is estimated by an expectation-maximization loop over a
//! hierarchical Bayesian regression model with Laplacian noise and prior,
//! regularized by a total-variation penalty in the gradient domain. The
//! M-step uses half-quadratic splitting: a reweighted least-squares update,
//! an element-wise shrinkage update, and a frequency-domain deconvolution.
//!
//! The crate also ships the five quality metrics commonly used to score
//! fusion output (entropy, mutual information, edge preservation, standard
//! deviation, structural similarity) and directory-pairing helpers for
//! benchmark datasets.
//!
//! All numeric code is generic over the scalar type ([`Real`]); `f64` is the
//! default width used by the CLI and the type aliases below.

pub mod dataset;
pub mod em;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod plane;
pub mod scalar;

pub use error::{FusionError, Result};
pub use plane::{GradientField, ImagePlane, IntensityScale};
pub use scalar::Real;

pub use dataset::{
    discover_pairs, load_grayscale, save_grayscale, DatasetLayout, Discovery, ImagePairRecord,
};
pub use em::{fuse, EmState, FusionParams};
pub use metrics::{evaluate, MetricReport};

/// Default-precision plane (`f64`).
pub type Plane = ImagePlane<f64>;
/// Single-precision plane.
pub type Plane32 = ImagePlane<f32>;
/// Default-precision gradient field.
pub type Field = GradientField<f64>;
/// Default-precision parameter block.
pub type Params = FusionParams<f64>;
/// Default-precision metric report.
pub type Report = MetricReport<f64>;
