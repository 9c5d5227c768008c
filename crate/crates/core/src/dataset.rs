//! Image loading/saving and directory pairing for fusion datasets.
//!
//! Three pairing layouts are supported: `tno` (scene subdirectories holding
//! one `IR*` and one `VIS*` file each), `nir` (`<id>_nir.*` next to
//! `<id>_rgb.*`), and `flat` (`<id>_ir.*` next to `<id>_vis.*`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use image::DynamicImage;

use crate::error::{FusionError, Result};
use crate::plane::{ImagePlane, IntensityScale};
use crate::scalar::Real;

/// One infrared/visible pair found on disk. Records returned by
/// [`discover_pairs`] are guaranteed to decode to identical dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePairRecord {
    pub id: String,
    pub ir_path: PathBuf,
    pub vis_path: PathBuf,
}

/// Directory convention used by [`discover_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetLayout {
    /// Scene subdirectories, each with one `IR*` and one `VIS*` image.
    Tno,
    /// `<id>_nir.*` paired with `<id>_rgb.*` in one directory.
    Nir,
    /// `<id>_ir.*` paired with `<id>_vis.*` in one directory.
    Flat,
}

impl DatasetLayout {
    fn expectation(&self) -> &'static str {
        match self {
            DatasetLayout::Tno => {
                "subdirectories each containing one image named IR* and one named VIS*"
            }
            DatasetLayout::Nir => "files named <id>_nir.<ext> paired with <id>_rgb.<ext>",
            DatasetLayout::Flat => "files named <id>_ir.<ext> paired with <id>_vis.<ext>",
        }
    }
}

impl fmt::Display for DatasetLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetLayout::Tno => write!(f, "tno"),
            DatasetLayout::Nir => write!(f, "nir"),
            DatasetLayout::Flat => write!(f, "flat"),
        }
    }
}

/// Result of a dataset scan. Nothing is dropped silently: pairs that
/// matched the naming rule but failed the readability/dimension gate land in
/// `rejected`, all other anomalies (orphans, ambiguous directories) in
/// `warnings`.
#[derive(Debug, Clone)]
pub struct Discovery {
    /// Usable pairs, sorted by id; both images decode to equal dimensions.
    pub pairs: Vec<ImagePairRecord>,
    /// `(id, reason)` for pairs rejected by the gate, sorted by id.
    pub rejected: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "bmp", "pgm"];

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Loads an image as a single grayscale plane in the requested scale.
///
/// RGB inputs are converted with the luminance weights
/// `0.299 R + 0.587 G + 0.114 B`; 16-bit samples are divided by 65535 into
/// unit scale (257 into byte scale). Alpha channels are ignored.
pub fn load_grayscale<T: Real>(path: &Path, scale: IntensityScale) -> Result<ImagePlane<T>> {
    let reader = image::ImageReader::open(path).map_err(|e| FusionError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let img = reader.decode().map_err(|e| FusionError::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);

    let luma = |r: f64, g: f64, b: f64| 0.299 * r + 0.587 * g + 0.114 * b;
    let (values, sample_max): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 255.0),
        DynamicImage::ImageLumaA8(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 255.0),
        DynamicImage::ImageRgb8(buf) => (
            buf.pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            255.0,
        ),
        DynamicImage::ImageRgba8(buf) => (
            buf.pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            255.0,
        ),
        DynamicImage::ImageLuma16(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 65535.0),
        DynamicImage::ImageLumaA16(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 65535.0),
        DynamicImage::ImageRgb16(buf) => (
            buf.pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            65535.0,
        ),
        DynamicImage::ImageRgba16(buf) => (
            buf.pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            65535.0,
        ),
        other => {
            return Err(FusionError::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("sample format {:?} (only 8/16-bit integer supported)", other.color()),
            })
        }
    };

    let factor = match scale {
        IntensityScale::Unit => 1.0 / sample_max,
        IntensityScale::Byte => 255.0 / sample_max,
    };
    let data = values
        .into_iter()
        .map(|v| T::from_f64(v * factor).unwrap())
        .collect();
    ImagePlane::from_vec(h, w, data)
}

/// Writes a plane as an 8-bit grayscale image (format chosen by extension:
/// PNG, PGM, or BMP), quantizing with round-half-away-from-zero.
///
/// Intensities must lie within the declared range; a reloaded image then
/// differs from the original by at most half a quantization step per pixel.
pub fn save_grayscale<T: Real>(
    plane: &ImagePlane<T>,
    path: &Path,
    scale: IntensityScale,
) -> Result<()> {
    let hi = scale.range_max::<T>();
    if !plane.within(T::zero(), hi) {
        return Err(FusionError::InvalidInput(format!(
            "cannot save {}: intensities outside [0, {hi}]",
            path.display()
        )));
    }
    let factor = T::from_f64(255.0).unwrap() / hi;
    let bytes: Vec<u8> = plane
        .iter()
        .map(|&v| (v * factor).round().to_u8().unwrap_or(255))
        .collect();
    let (h, w) = plane.dims();
    let buf: image::GrayImage =
        image::ImageBuffer::from_raw(w as u32, h as u32, bytes).expect("sized from plane");

    let img_err = |e| FusionError::Image {
        path: path.to_path_buf(),
        source: e,
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    if matches!(ext.as_deref(), Some("pgm") | Some("pnm")) {
        // Pin the subtype: .pgm means binary (P5) graymap, not PAM.
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        let file = std::fs::File::create(path).map_err(|e| FusionError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let encoder = PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
        buf.write_with_encoder(encoder).map_err(img_err)
    } else {
        buf.save(path).map_err(img_err)
    }
}

/// Scans `root` for infrared/visible pairs under the given layout.
///
/// The result is sorted by id and deterministic. Pairs whose images cannot
/// be read or whose dimensions disagree are excluded but reported in
/// `warnings`; an empty result is an error spelling out the expected layout.
pub fn discover_pairs(root: &Path, layout: DatasetLayout) -> Result<Discovery> {
    if !root.is_dir() {
        return Err(FusionError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let discovery = match layout {
        DatasetLayout::Flat => pair_by_suffix(root, "_ir", "_vis")?,
        DatasetLayout::Nir => pair_by_suffix(root, "_nir", "_rgb")?,
        DatasetLayout::Tno => pair_by_subdirectory(root)?,
    };

    // Dimension gate: every returned record must decode to matching sizes.
    let mut pairs = Vec::new();
    let mut rejected = Vec::new();
    for record in discovery.pairs {
        match (
            image::image_dimensions(&record.ir_path),
            image::image_dimensions(&record.vis_path),
        ) {
            (Ok(a), Ok(b)) if a == b => pairs.push(record),
            (Ok(a), Ok(b)) => rejected.push((
                record.id,
                format!("dimension mismatch {}x{} vs {}x{}", a.0, a.1, b.0, b.1),
            )),
            (Err(e), _) => rejected.push((
                record.id,
                format!("cannot read {}: {e}", record.ir_path.display()),
            )),
            (_, Err(e)) => rejected.push((
                record.id,
                format!("cannot read {}: {e}", record.vis_path.display()),
            )),
        }
    }
    pairs.sort_by(|a, b| a.id.cmp(&b.id));
    rejected.sort();

    if pairs.is_empty() && rejected.is_empty() {
        return Err(FusionError::NoPairsFound {
            root: root.to_path_buf(),
            expectation: format!("{layout} layout expects {}", layout.expectation()),
        });
    }
    Ok(Discovery {
        pairs,
        rejected,
        warnings: discovery.warnings,
    })
}

/// Pairs `<id><ir_suffix>.<ext>` with `<id><vis_suffix>.<ext>` in one
/// directory (suffix match on the lowercased stem).
fn pair_by_suffix(root: &Path, ir_suffix: &str, vis_suffix: &str) -> Result<Discovery> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| FusionError::Io {
            path: root.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    files.sort();

    let mut irs: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut viss: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut warnings = Vec::new();
    for path in files {
        let stem = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s.to_ascii_lowercase(),
            None => continue,
        };
        let slot = if let Some(id) = stem.strip_suffix(ir_suffix) {
            Some((id.to_string(), &mut irs))
        } else {
            stem.strip_suffix(vis_suffix)
                .map(|id| (id.to_string(), &mut viss))
        };
        match slot {
            Some((id, map)) => {
                if let Some(prev) = map.get(&id) {
                    warnings.push(format!(
                        "id '{id}': ignoring duplicate {} (already have {})",
                        path.display(),
                        prev.display()
                    ));
                } else {
                    map.insert(id, path);
                }
            }
            None => warnings.push(format!(
                "ignoring {}: name does not end in {ir_suffix} or {vis_suffix}",
                path.display()
            )),
        }
    }

    let mut pairs = Vec::new();
    for (id, ir_path) in &irs {
        match viss.get(id) {
            Some(vis_path) => pairs.push(ImagePairRecord {
                id: id.clone(),
                ir_path: ir_path.clone(),
                vis_path: vis_path.clone(),
            }),
            None => warnings.push(format!(
                "orphan '{id}': found {} without a {vis_suffix} counterpart",
                ir_path.display()
            )),
        }
    }
    for (id, vis_path) in &viss {
        if !irs.contains_key(id) {
            warnings.push(format!(
                "orphan '{id}': found {} without a {ir_suffix} counterpart",
                vis_path.display()
            ));
        }
    }
    Ok(Discovery { pairs, rejected: Vec::new(), warnings })
}

/// TNO-style pairing: every directory below `root` that contains exactly one
/// `IR*` image and one `VIS*` image yields a pair, identified by the
/// directory path relative to `root`.
fn pair_by_subdirectory(root: &Path) -> Result<Discovery> {
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for entry in walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_dir())
    {
        let dir = entry.path();
        let mut irs = Vec::new();
        let mut viss = Vec::new();
        let mut names: Vec<PathBuf> = match std::fs::read_dir(dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image_file(p))
                .collect(),
            Err(e) => {
                warnings.push(format!("cannot list {}: {e}", dir.display()));
                continue;
            }
        };
        names.sort();
        for path in names {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_ascii_lowercase();
            if stem.starts_with("ir") {
                irs.push(path);
            } else if stem.starts_with("vis") {
                viss.push(path);
            }
        }
        let id = dir
            .strip_prefix(root)
            .map(|p| p.to_string_lossy().replace(std::path::MAIN_SEPARATOR, "/"))
            .unwrap_or_default();
        let id = if id.is_empty() { ".".to_string() } else { id };
        match (irs.len(), viss.len()) {
            (1, 1) => pairs.push(ImagePairRecord {
                id,
                ir_path: irs.pop().unwrap(),
                vis_path: viss.pop().unwrap(),
            }),
            (0, 0) => {}
            _ => warnings.push(format!(
                "directory '{id}': expected one IR* and one VIS* image, found {} and {}",
                irs.len(),
                viss.len()
            )),
        }
    }
    Ok(Discovery { pairs, rejected: Vec::new(), warnings })
}
