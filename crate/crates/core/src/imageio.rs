//! Image ingestion, heatmap rendering and atomic file writes.
//!
//! Heatmaps normalize by the global maximum, raise to `gamma`, and map the
//! result through a polynomial approximation of the viridis colormap. The
//! PGM variant stores `round(255 * (v / max)^gamma)` directly.

use std::io::Write;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::erf::ErfMap;
use crate::error::{invalid, Error, Result};
use crate::tensor::{Shape, Tensor};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Image files in `dir` with a PNG/PNM extension, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_image(path: &Path, shape: Shape) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    image_from_bytes(&bytes, shape).map_err(|e| Error::Image { path: path.to_owned(), message: e.to_string() })
}

/// Decodes an 8-bit PNG/PNM image into a tensor of `shape` with values in `[0, 1]`.
///
/// Larger images are center-cropped. Gray images are replicated across
/// channels; color images are averaged when `shape.channels == 1` and take
/// RGB otherwise (extra channels repeat the luminance).
pub fn image_from_bytes(bytes: &[u8], shape: Shape) -> Result<Tensor> {
    let img = image::load_from_memory(bytes).map_err(|e| invalid(format!("cannot decode image: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if h < shape.height || w < shape.width {
        return Err(invalid(format!(
            "image is {w}x{h}, smaller than the {}x{} network input",
            shape.width, shape.height
        )));
    }
    let (top, left) = ((h - shape.height) / 2, (w - shape.width) / 2);
    let gray = matches!(img, DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_));
    let rgb = img.to_rgb8();
    let mut values = Vec::with_capacity(shape.len());
    for y in top..top + shape.height {
        for x in left..left + shape.width {
            let p = rgb.get_pixel(x as u32, y as u32).0.map(|v| f64::from(v) / 255.0);
            let luma = (p[0] + p[1] + p[2]) / 3.0;
            for c in 0..shape.channels {
                values.push(match c {
                    _ if gray => p[0],
                    0..=2 if shape.channels > 1 => p[c],
                    _ => luma,
                });
            }
        }
    }
    Tensor::from_vec(shape, values)
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Max-normalized, gamma-corrected intensities in `[0, 1]`.
pub fn normalized(erf: &ErfMap, gamma: f64) -> Vec<f64> {
    let max = erf.max_value();
    if max <= 0.0 {
        return vec![0.0; erf.values().len()];
    }
    erf.values().iter().map(|v| (v / max).clamp(0.0, 1.0).powf(gamma)).collect()
}

/// 8-bit gray levels stored in the PGM heatmap.
pub fn quantize(erf: &ErfMap, gamma: f64) -> Vec<u8> {
    normalized(erf, gamma).into_iter().map(|v| (v * 255.0).round() as u8).collect()
}

/// Viridis, approximated by a degree-6 polynomial per channel.
pub fn viridis(t: f64) -> [u8; 3] {
    const C: [[f64; 3]; 7] = [
        [0.277_727_327_223_417_7, 0.005_407_344_544_966_578, 0.334_099_805_335_306_1],
        [0.105_093_043_108_577_4, 1.404_613_529_898_575, 1.384_590_162_594_685],
        [-0.330_861_828_725_556_3, 0.214_847_559_468_213, 0.095_095_163_028_236_59],
        [-4.634_230_498_983_486, -5.799_100_973_351_585, -19.332_440_956_279_87],
        [6.228_269_936_347_081, 14.179_933_366_805_09, 56.690_552_600_681_05],
        [4.776_384_997_670_288, -13.745_145_377_746_01, -65.353_032_633_372_34],
        [-5.435_455_855_934_631, 4.645_852_612_178_535, 26.312_435_249_583_2],
    ];
    let t = t.clamp(0.0, 1.0);
    let mut rgb = [0u8; 3];
    for (ch, out) in rgb.iter_mut().enumerate() {
        let v = C.iter().rev().fold(0.0, |acc, c| acc * t + c[ch]);
        *out = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    }
    rgb
}

pub fn encode_png(erf: &ErfMap, gamma: f64) -> Result<Vec<u8>> {
    let rgb: Vec<u8> = normalized(erf, gamma).into_iter().flat_map(viridis).collect();
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf)
        .write_image(&rgb, erf.width() as u32, erf.height() as u32, ExtendedColorType::Rgb8)
        .map_err(|e| invalid(format!("png encoding failed: {e}")))?;
    Ok(buf)
}

pub fn encode_pgm(erf: &ErfMap, gamma: f64) -> Result<Vec<u8>> {
    let gray = quantize(erf, gamma);
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&gray, erf.width() as u32, erf.height() as u32, ExtendedColorType::L8)
        .map_err(|e| invalid(format!("pgm encoding failed: {e}")))?;
    Ok(buf)
}

/// Output paths written by [`render_heatmap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapFiles {
    pub png: PathBuf,
    pub pgm: PathBuf,
}

/// Writes `out_path` as a colormapped PNG and a grayscale PGM beside it.
pub fn render_heatmap(erf: &ErfMap, gamma: f64, out_path: &Path) -> Result<HeatmapFiles> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    let png = out_path.with_extension("png");
    let pgm = out_path.with_extension("pgm");
    atomic_write(&png, &encode_png(erf, gamma)?)?;
    atomic_write(&pgm, &encode_pgm(erf, gamma)?)?;
    Ok(HeatmapFiles { png, pgm })
}
