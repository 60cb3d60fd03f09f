//! Effective receptive field of the central output unit.
//!
//! For each image `I` the central unit `Y = Σ_k ŷ[C_h, C_w, k]` is
//! differentiated with respect to `I`, the gradient is summed over channels
//! into `G`, and `R = Σ_I ReLU(G)` is accumulated in image-index order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::graph::{derive_seed, NetworkGraph};
use crate::imageio;
use crate::tensor::{Shape, Tensor};

/// Where the images of the accumulation set come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    /// Uniform noise in `[-1, 1]`, one ChaCha8 stream per image index.
    SyntheticNoise,
    /// 8-bit PNG/PGM/PPM files, sorted by file name, scaled to `[0, 1]`.
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErfConfig {
    pub center_row: usize,
    pub center_col: usize,
    pub n_images: usize,
    pub image_seed: u64,
    pub image_source: ImageSource,
}

impl ErfConfig {
    /// Synthetic-noise config centered with [`default_center`].
    pub fn synthetic(height: usize, width: usize, n_images: usize, image_seed: u64) -> Self {
        let (center_row, center_col) = default_center(height, width);
        Self { center_row, center_col, n_images, image_seed, image_source: ImageSource::SyntheticNoise }
    }
}

/// `(⌊(H−1)/2⌋, ⌊W/2⌋)`; gives (383, 384) for a 768×768 image.
pub fn default_center(height: usize, width: usize) -> (usize, usize) {
    (height.saturating_sub(1) / 2, width / 2)
}

/// Output-shaped seed with a one at `center` for every class.
pub fn central_seed(height: usize, width: usize, n_classes: usize, center: (usize, usize)) -> Result<Tensor> {
    let (row, col) = center;
    if row >= height || col >= width {
        return Err(invalid(format!("center ({row}, {col}) outside {height}x{width}")));
    }
    let mut seed = Tensor::zeros(Shape::new(height, width, n_classes))?;
    for k in 0..n_classes {
        seed.set(row, col, k, 1.0);
    }
    Ok(seed)
}

/// Nonnegative accumulated influence map `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErfMap {
    map: Tensor,
    n_accumulated: usize,
}

impl ErfMap {
    pub fn from_tensor(map: Tensor, n_accumulated: usize) -> Result<Self> {
        if map.channels() != 1 {
            return Err(shape(format!("an ERF map has one channel, got {}", map.shape())));
        }
        if map.values().iter().any(|&v| v < 0.0) {
            return Err(invalid("ERF values must be nonnegative"));
        }
        Ok(Self { map, n_accumulated })
    }

    pub fn height(&self) -> usize {
        self.map.height()
    }

    pub fn width(&self) -> usize {
        self.map.width()
    }

    pub fn values(&self) -> &[f64] {
        self.map.values()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.map.get(row, col, 0)
    }

    pub fn n_accumulated(&self) -> usize {
        self.n_accumulated
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.map
    }

    pub fn max_value(&self) -> f64 {
        self.map.max_value()
    }

    /// Elementwise sum of two maps accumulated over disjoint image sets.
    pub fn merge(&self, other: &ErfMap) -> Result<ErfMap> {
        let mut map = self.map.clone();
        map.add_assign(&other.map)?;
        Ok(ErfMap { map, n_accumulated: self.n_accumulated + other.n_accumulated })
    }

    pub fn to_dump_bytes(&self) -> Vec<u8> {
        self.map.to_dump_bytes()
    }

    /// Reads the raw tensor dump; `n_accumulated` is not stored and reads back as 0.
    pub fn from_dump_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_tensor(Tensor::from_dump_bytes(bytes)?, 0)
            .map_err(|e| Error::MalformedDump(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_dump_bytes(&std::fs::read(path)?)
    }
}

/// Channel-summed input gradient `G` of the central unit for one image.
pub fn erf_single(net: &NetworkGraph, image: &Tensor, config: &ErfConfig) -> Result<Tensor> {
    let out = net.output_shape();
    let seed = central_seed(out.height, out.width, out.channels, (config.center_row, config.center_col))?;
    Ok(net.grad_wrt_input(image, &seed)?.reduce_channels_sum())
}

/// Synthetic image `index` of the set identified by `image_seed`.
pub fn synthetic_image(shape: Shape, image_seed: u64, index: usize) -> Result<Tensor> {
    Tensor::random(shape.height, shape.width, shape.channels, derive_seed(image_seed, index as u64), 1.0)
}

enum Images {
    Synthetic { seed: u64, count: usize },
    Files(Vec<PathBuf>),
}

impl Images {
    fn len(&self) -> usize {
        match self {
            Images::Synthetic { count, .. } => *count,
            Images::Files(f) => f.len(),
        }
    }

    fn load(&self, index: usize, shape: Shape) -> Result<Tensor> {
        match self {
            Images::Synthetic { seed, .. } => synthetic_image(shape, *seed, index),
            Images::Files(files) => imageio::load_image(&files[index], shape),
        }
    }
}

fn resolve_images(config: &ErfConfig) -> Result<Images> {
    if config.n_images == 0 {
        return Err(invalid("the image set must contain at least one image"));
    }
    match &config.image_source {
        ImageSource::SyntheticNoise => Ok(Images::Synthetic { seed: config.image_seed, count: config.n_images }),
        ImageSource::Directory(dir) => {
            let mut files = imageio::list_images(dir)?;
            if files.is_empty() {
                return Err(invalid(format!("no PNG/PGM/PPM images in {}", dir.display())));
            }
            if files.len() < config.n_images {
                log::warn!(
                    "{} holds {} images, fewer than the {} requested",
                    dir.display(),
                    files.len(),
                    config.n_images
                );
            }
            files.truncate(config.n_images);
            Ok(Images::Files(files))
        }
    }
}

/// `R = Σ_{I ∈ S} ReLU(G_I)`, reduced in ascending image order.
///
/// Gradients for a batch of images are evaluated in parallel; the reduction
/// order never depends on scheduling, so results are bit-reproducible.
pub fn erf_accumulate(net: &NetworkGraph, config: &ErfConfig) -> Result<ErfMap> {
    let images = resolve_images(config)?;
    let input = net.input_shape();
    let out = net.output_shape();
    let seed = central_seed(out.height, out.width, out.channels, (config.center_row, config.center_col))?;

    let mut acc = Tensor::zeros(Shape::new(input.height, input.width, 1))?;
    let batch = rayon::current_num_threads().max(1);
    let total = images.len();
    for start in (0..total).step_by(batch) {
        let end = (start + batch).min(total);
        let grads: Vec<Result<Tensor>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let img = images.load(i, input)?;
                Ok(net.grad_wrt_input(&img, &seed)?.reduce_channels_sum())
            })
            .collect();
        for g in grads {
            let g = g?;
            for (a, v) in acc.values_mut().iter_mut().zip(g.values()) {
                *a += v.max(0.0);
            }
        }
    }
    ErfMap::from_tensor(acc, total)
}
