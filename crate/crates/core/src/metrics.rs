//! Fusion quality metrics computed from (infrared, visible, fused) triples:
//! entropy, mutual information, the Xydeas-Petrovic edge-preservation index,
//! standard deviation, and windowed structural similarity, plus dataset-level
//! averaging.
//!
//! Conventions pinned here so numbers are reproducible:
//! 256-bin histograms over an 8-bit quantization (round half away from zero)
//! for entropy and mutual information, base-2 logarithms, Sobel 3x3 with
//! replicate padding and the published sigmoid constants for edge
//! preservation, 8x8 stride-1 uniform windows with the standard stabilizers
//! for SSIM, and population (not sample) standard deviation.

use crate::error::{FusionError, Result};
use crate::plane::{ImagePlane, IntensityScale};
use crate::scalar::Real;

/// Per-pair metric values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport<T> {
    /// Entropy of the fused image, bits.
    pub en: T,
    /// MI(ir, fused) + MI(vis, fused), bits.
    pub mi: T,
    /// Edge-preservation score in `[0, 1]`.
    pub qabf: T,
    /// Standard deviation of the fused image, always reported on the 8-bit
    /// intensity range so reports from different working scales compare.
    pub sd: T,
    /// SSIM(ir, fused) + SSIM(vis, fused).
    pub ssim_sum: T,
    /// Mean of the two SSIM values.
    pub ssim_mean: T,
}

impl<T: Real> MetricReport<T> {
    /// Arithmetic mean of a batch of reports; `None` when empty.
    pub fn mean(reports: &[Self]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = T::from_usize(reports.len()).unwrap();
        let mut acc = Self {
            en: T::zero(),
            mi: T::zero(),
            qabf: T::zero(),
            sd: T::zero(),
            ssim_sum: T::zero(),
            ssim_mean: T::zero(),
        };
        for r in reports {
            acc.en += r.en;
            acc.mi += r.mi;
            acc.qabf += r.qabf;
            acc.sd += r.sd;
            acc.ssim_sum += r.ssim_sum;
            acc.ssim_mean += r.ssim_mean;
        }
        Some(Self {
            en: acc.en / n,
            mi: acc.mi / n,
            qabf: acc.qabf / n,
            sd: acc.sd / n,
            ssim_sum: acc.ssim_sum / n,
            ssim_mean: acc.ssim_mean / n,
        })
    }
}

/// Quantizes a plane to 8-bit bins, rounding half away from zero.
fn quantize<T: Real>(p: &ImagePlane<T>, scale: IntensityScale) -> Vec<u8> {
    let factor = T::from_f64(255.0).unwrap() / scale.range_max::<T>();
    p.iter()
        .map(|&v| {
            let q = (v * factor).round();
            let q = q.max(T::zero()).min(T::from_f64(255.0).unwrap());
            q.to_u8().unwrap_or(255)
        })
        .collect()
}

/// Shannon entropy in bits of the 256-bin histogram of the 8-bit
/// quantization. Empty bins contribute zero; a constant image scores zero.
pub fn entropy<T: Real>(i: &ImagePlane<T>, scale: IntensityScale) -> T {
    let mut counts = [0u64; 256];
    for b in quantize(i, scale) {
        counts[b as usize] += 1;
    }
    let n = T::from_usize(i.len()).unwrap();
    let mut h = T::zero();
    for &c in counts.iter() {
        if c > 0 {
            let p = T::from_u64(c).unwrap() / n;
            h -= p * p.log2();
        }
    }
    h
}

/// `MI(u, i) + MI(v, i)` in bits, each term from the 256x256 joint histogram
/// of the 8-bit quantizations.
pub fn mutual_information<T: Real>(
    u: &ImagePlane<T>,
    v: &ImagePlane<T>,
    i: &ImagePlane<T>,
    scale: IntensityScale,
) -> Result<T> {
    u.check_same_dims(i)?;
    v.check_same_dims(i)?;
    let qi = quantize(i, scale);
    Ok(mi_pair::<T>(&quantize(u, scale), &qi) + mi_pair::<T>(&quantize(v, scale), &qi))
}

fn mi_pair<T: Real>(a: &[u8], b: &[u8]) -> T {
    let mut joint = vec![0u64; 256 * 256];
    let mut ma = [0u64; 256];
    let mut mb = [0u64; 256];
    for (&x, &y) in a.iter().zip(b.iter()) {
        joint[(x as usize) * 256 + y as usize] += 1;
        ma[x as usize] += 1;
        mb[y as usize] += 1;
    }
    let n = T::from_usize(a.len()).unwrap();
    let mut mi = T::zero();
    for x in 0..256 {
        if ma[x] == 0 {
            continue;
        }
        let pa = T::from_u64(ma[x]).unwrap() / n;
        for y in 0..256 {
            let c = joint[x * 256 + y];
            if c == 0 {
                continue;
            }
            let pab = T::from_u64(c).unwrap() / n;
            let pb = T::from_u64(mb[y]).unwrap() / n;
            mi += pab * (pab / (pa * pb)).log2();
        }
    }
    // A KL divergence is non-negative; clamp the roundoff of near-independent
    // inputs.
    mi.max(T::zero())
}

/// Population standard deviation of all pixels (divide by `h*w`).
pub fn std_dev<T: Real>(i: &ImagePlane<T>) -> T {
    let n = T::from_usize(i.len()).unwrap();
    let mut mean = T::zero();
    for &v in i.iter() {
        mean += v;
    }
    mean /= n;
    let mut var = T::zero();
    for &v in i.iter() {
        let d = v - mean;
        var += d * d;
    }
    (var / n).sqrt()
}

// Xydeas-Petrovic sigmoid constants: ceiling, slope, offset for the edge
// strength and orientation preservation terms.
const QABF_GAMMA_G: f64 = 0.9994;
const QABF_KAPPA_G: f64 = -15.0;
const QABF_SIGMA_G: f64 = 0.5;
const QABF_GAMMA_A: f64 = 0.9879;
const QABF_KAPPA_A: f64 = -22.0;
const QABF_SIGMA_A: f64 = 0.8;

/// Edge-preservation index in `[0, 1]`.
///
/// Sobel edge strength and orientation per source; per-pixel preservation via
/// the standard sigmoids, each normalized by its value at perfect
/// preservation so an unchanged edge scores exactly 1; weighted by source
/// edge strengths. Zero when neither source carries any edge energy.
pub fn qabf<T: Real>(u: &ImagePlane<T>, v: &ImagePlane<T>, i: &ImagePlane<T>) -> Result<T> {
    u.check_same_dims(i)?;
    v.check_same_dims(i)?;
    let (h, w) = i.dims();
    if h < 3 || w < 3 {
        return Err(FusionError::InvalidInput(format!(
            "edge preservation needs at least 3x3 images, got {h}x{w}"
        )));
    }

    let (gu, au) = sobel_strength_orientation(u);
    let (gv, av) = sobel_strength_orientation(v);
    let (gf, af) = sobel_strength_orientation(i);

    let mut num = T::zero();
    let mut den = T::zero();
    for idx in 0..h * w {
        let qu = preservation::<T>(gu[idx], au[idx], gf[idx], af[idx]);
        let qv = preservation::<T>(gv[idx], av[idx], gf[idx], af[idx]);
        num += qu * gu[idx] + qv * gv[idx];
        den += gu[idx] + gv[idx];
    }
    if den == T::zero() {
        return Ok(T::zero());
    }
    Ok(num / den)
}

/// Per-pixel preservation of one source edge in the fused image.
fn preservation<T: Real>(g_src: T, angle_src: T, g_fused: T, angle_fused: T) -> T {
    // Relative strength: ratio of the weaker to the stronger edge.
    let (lo, hi) = if g_src < g_fused {
        (g_src, g_fused)
    } else {
        (g_fused, g_src)
    };
    let g_rel = if hi == T::zero() { T::one() } else { lo / hi };
    // Orientation agreement mapped to [.., 1].
    let half_pi = T::from_f64(std::f64::consts::FRAC_PI_2).unwrap();
    let a_rel = T::one() - (angle_src - angle_fused).abs() / half_pi;
    sigmoid::<T>(QABF_GAMMA_G, QABF_KAPPA_G, QABF_SIGMA_G, g_rel)
        * sigmoid::<T>(QABF_GAMMA_A, QABF_KAPPA_A, QABF_SIGMA_A, a_rel)
        / (qg_perfect::<T>() * qa_perfect::<T>())
}

fn sigmoid<T: Real>(gamma: f64, kappa: f64, sigma: f64, x: T) -> T {
    let gamma = T::from_f64(gamma).unwrap();
    let kappa = T::from_f64(kappa).unwrap();
    let sigma = T::from_f64(sigma).unwrap();
    gamma / (T::one() + (kappa * (x - sigma)).exp())
}

fn qg_perfect<T: Real>() -> T {
    sigmoid::<T>(QABF_GAMMA_G, QABF_KAPPA_G, QABF_SIGMA_G, T::one())
}

fn qa_perfect<T: Real>() -> T {
    sigmoid::<T>(QABF_GAMMA_A, QABF_KAPPA_A, QABF_SIGMA_A, T::one())
}

/// 3x3 Sobel gradients (replicate padding, so a constant image has no edge
/// response anywhere) reduced to per-pixel edge strength and orientation
/// `atan(sy/sx)` in `[-pi/2, pi/2]`.
fn sobel_strength_orientation<T: Real>(p: &ImagePlane<T>) -> (Vec<T>, Vec<T>) {
    let (h, w) = p.dims();
    let at = |i: isize, j: isize| -> T {
        let i = i.clamp(0, h as isize - 1) as usize;
        let j = j.clamp(0, w as isize - 1) as usize;
        p[(i, j)]
    };
    let two = T::from_f64(2.0).unwrap();
    let half_pi = T::from_f64(std::f64::consts::FRAC_PI_2).unwrap();
    let mut strength = Vec::with_capacity(h * w);
    let mut orientation = Vec::with_capacity(h * w);
    for i in 0..h as isize {
        for j in 0..w as isize {
            let sx = at(i - 1, j + 1) + two * at(i, j + 1) + at(i + 1, j + 1)
                - at(i - 1, j - 1)
                - two * at(i, j - 1)
                - at(i + 1, j - 1);
            let sy = at(i + 1, j - 1) + two * at(i + 1, j) + at(i + 1, j + 1)
                - at(i - 1, j - 1)
                - two * at(i - 1, j)
                - at(i - 1, j + 1);
            strength.push((sx * sx + sy * sy).sqrt());
            let angle = if sx == T::zero() {
                if sy > T::zero() {
                    half_pi
                } else if sy < T::zero() {
                    -half_pi
                } else {
                    T::zero()
                }
            } else {
                (sy / sx).atan()
            };
            orientation.push(angle);
        }
    }
    (strength, orientation)
}

/// Window side of the local SSIM statistics.
pub const SSIM_WINDOW: usize = 8;

/// `(SSIM(u,i) + SSIM(v,i), their mean)` over 8x8 sliding windows with
/// stride 1 and stabilizers `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`.
pub fn ssim_pair<T: Real>(
    u: &ImagePlane<T>,
    v: &ImagePlane<T>,
    i: &ImagePlane<T>,
    scale: IntensityScale,
) -> Result<(T, T)> {
    let sum = ssim_one(u, i, scale)? + ssim_one(v, i, scale)?;
    Ok((sum, sum / T::from_f64(2.0).unwrap()))
}

fn ssim_one<T: Real>(a: &ImagePlane<T>, b: &ImagePlane<T>, scale: IntensityScale) -> Result<T> {
    a.check_same_dims(b)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(FusionError::InvalidInput(format!(
            "structural similarity needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {h}x{w}"
        )));
    }
    let range = scale.range_max::<T>();
    let c1 = (T::from_f64(0.01).unwrap() * range).powi(2);
    let c2 = (T::from_f64(0.03).unwrap() * range).powi(2);
    let n = T::from_usize(SSIM_WINDOW * SSIM_WINDOW).unwrap();
    let two = T::from_f64(2.0).unwrap();

    let mut total = T::zero();
    let mut windows = 0usize;
    for i0 in 0..=h - SSIM_WINDOW {
        for j0 in 0..=w - SSIM_WINDOW {
            let mut sum_a = T::zero();
            let mut sum_b = T::zero();
            for di in 0..SSIM_WINDOW {
                for dj in 0..SSIM_WINDOW {
                    sum_a += a[(i0 + di, j0 + dj)];
                    sum_b += b[(i0 + di, j0 + dj)];
                }
            }
            let mu_a = sum_a / n;
            let mu_b = sum_b / n;
            let mut var_a = T::zero();
            let mut var_b = T::zero();
            let mut cov = T::zero();
            for di in 0..SSIM_WINDOW {
                for dj in 0..SSIM_WINDOW {
                    let da = a[(i0 + di, j0 + dj)] - mu_a;
                    let db = b[(i0 + di, j0 + dj)] - mu_b;
                    var_a += da * da;
                    var_b += db * db;
                    cov += da * db;
                }
            }
            var_a /= n;
            var_b /= n;
            cov /= n;
            let score = ((two * mu_a * mu_b + c1) * (two * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += score;
            windows += 1;
        }
    }
    Ok(total / T::from_usize(windows).unwrap())
}

/// Computes the full metric set for a fused triple.
///
/// `sd` is rescaled into byte units when the working scale is `Unit` so that
/// dataset-level tables are comparable regardless of the processing range.
pub fn evaluate<T: Real>(
    u: &ImagePlane<T>,
    v: &ImagePlane<T>,
    i: &ImagePlane<T>,
    scale: IntensityScale,
) -> Result<MetricReport<T>> {
    u.check_same_dims(i)?;
    v.check_same_dims(i)?;
    let byte_factor = T::from_f64(255.0).unwrap() / scale.range_max::<T>();
    let (ssim_sum, ssim_mean) = ssim_pair(u, v, i, scale)?;
    Ok(MetricReport {
        en: entropy(i, scale),
        mi: mutual_information(u, v, i, scale)?,
        qabf: qabf(u, v, i)?,
        sd: std_dev(i) * byte_factor,
        ssim_sum,
        ssim_mean,
    })
}
