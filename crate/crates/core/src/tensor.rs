//! Dense rank-3 arrays in row-major `(h, w, c)` order.
//!
//! Random tensors come from ChaCha8 seeded through `seed_from_u64`. Each value
//! takes the top 53 bits of one `next_u64` draw, `u = (bits >> 11) * 2^-53`
//! in `[0, 1)`, mapped to `scale * (2u - 1)`. Both the stream and the mapping
//! are platform independent.
//!
//! The raw dump format is three little-endian `u32` (height, width, channels)
//! followed by `height * width * channels` little-endian `f64` values.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, shape, Error, Result};

/// Spatial and channel extent of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn spatial(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn check(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(invalid(format!("tensor dimensions must be >= 1, got {self}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    values: Vec<f64>,
}

impl Tensor {
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        let shape = Shape::new(height, width, channels);
        shape.check()?;
        Ok(Self { shape, values: vec![value; shape.len()] })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::filled(shape.height, shape.width, shape.channels, 0.0)
    }

    /// Uniform values in `[-scale, scale]` from the documented ChaCha8 stream.
    pub fn random(height: usize, width: usize, channels: usize, seed: u64, scale: f64) -> Result<Self> {
        let shape = Shape::new(height, width, channels);
        shape.check()?;
        if !scale.is_finite() {
            return Err(invalid("random tensor scale must be finite"));
        }
        let values = uniform_values(shape.len(), seed, scale);
        Ok(Self { shape, values })
    }

    pub fn from_vec(shape: Shape, values: Vec<f64>) -> Result<Self> {
        shape.check()?;
        if values.len() != shape.len() {
            return Err(shape_err_len(shape, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("tensor values must be finite"));
        }
        Ok(Self { shape, values })
    }

    /// Internal constructor for op outputs whose length is known to be right.
    pub(crate) fn from_parts(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Self { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.shape.width + w) * self.shape.channels + c
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize, c: usize) -> f64 {
        self.values[self.index(h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, w: usize, c: usize, v: f64) {
        let i = self.index(h, w, c);
        self.values[i] = v;
    }

    /// `out[h][w][0] = sum_c t[h][w][c]`.
    pub fn reduce_channels_sum(&self) -> Tensor {
        let c = self.shape.channels;
        let values = self.values.chunks_exact(c).map(|px| px.iter().sum()).collect();
        Tensor::from_parts(Shape::new(self.shape.height, self.shape.width, 1), values)
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape(format!("cannot add {} to {}", other.shape, self.shape)));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Sum of `self ⊙ other`.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(shape(format!("cannot take dot of {} and {}", self.shape, other.shape)));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        for dim in [self.shape.height, self.shape.width, self.shape.channels] {
            let dim = u32::try_from(dim).map_err(|_| invalid("dimension exceeds u32"))?;
            out.write_all(&dim.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn to_dump_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(12 + self.values.len() * 8);
        self.write_dump(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_dump<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 12];
        input
            .read_exact(&mut header)
            .map_err(|_| Error::MalformedDump("truncated header".into()))?;
        let dim = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
        let shape = Shape::new(dim(0), dim(1), dim(2));
        shape.check().map_err(|_| Error::MalformedDump(format!("zero dimension in {shape}")))?;
        let len = shape
            .height
            .checked_mul(shape.width)
            .and_then(|n| n.checked_mul(shape.channels))
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::MalformedDump(format!("dimensions {shape} overflow")))?;

        let mut body = Vec::new();
        input.take(len as u64 + 1).read_to_end(&mut body)?;
        if body.len() != len {
            return Err(Error::MalformedDump(format!(
                "expected {len} payload bytes for {shape}, found {}{}",
                body.len().min(len),
                if body.len() > len { " plus trailing data" } else { "" }
            )));
        }
        let values: Vec<f64> =
            body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedDump("non-finite value".into()));
        }
        Ok(Self { shape, values })
    }

    pub fn from_dump_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_dump(bytes)
    }
}

fn shape_err_len(s: Shape, got: usize) -> Error {
    shape(format!("{s} needs {} values, got {got}", s.len()))
}

pub(crate) fn uniform_values(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            scale * (2.0 * u - 1.0)
        })
        .collect()
}

/// Convolution weights laid out `[kh][kw][in_channels][out_channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kh: usize,
    kw: usize,
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Kernel {
    pub fn new(
        kh: usize,
        kw: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 {
            return Err(invalid(format!("kernel extent must be positive and odd, got {kh}x{kw}")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(invalid("kernel channel counts must be >= 1"));
        }
        let n = kh * kw * in_channels * out_channels;
        if weights.len() != n {
            return Err(shape(format!("kernel needs {n} weights, got {}", weights.len())));
        }
        if bias.len() != out_channels {
            return Err(shape(format!("kernel needs {out_channels} biases, got {}", bias.len())));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(invalid("kernel values must be finite"));
        }
        Ok(Self { kh, kw, in_channels, out_channels, weights, bias })
    }

    /// Bias-free kernel with every weight set to `value`.
    pub fn constant(kh: usize, kw: usize, in_channels: usize, out_channels: usize, value: f64) -> Result<Self> {
        Self::new(
            kh,
            kw,
            in_channels,
            out_channels,
            vec![value; kh * kw * in_channels * out_channels],
            vec![0.0; out_channels],
        )
    }

    /// He-style uniform init: weights in `±sqrt(2 / fan_in)`, zero bias.
    pub fn he_uniform(kh: usize, kw: usize, in_channels: usize, out_channels: usize, seed: u64) -> Result<Self> {
        let fan_in = (kh * kw * in_channels) as f64;
        let weights = uniform_values(kh * kw * in_channels * out_channels, seed, (2.0 / fan_in).sqrt());
        Self::new(kh, kw, in_channels, out_channels, weights, vec![0.0; out_channels])
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize, c: usize, o: usize) -> f64 {
        self.weights[((i * self.kw + j) * self.in_channels + c) * self.out_channels + o]
    }

    /// The `out_channels` weights for tap `(i, j)` and input channel `c`.
    #[inline]
    pub(crate) fn row(&self, i: usize, j: usize, c: usize) -> &[f64] {
        let start = ((i * self.kw + j) * self.in_channels + c) * self.out_channels;
        &self.weights[start..start + self.out_channels]
    }

    pub fn without_bias(mut self) -> Self {
        self.bias.iter_mut().for_each(|b| *b = 0.0);
        self
    }
}
