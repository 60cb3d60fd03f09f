use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::tensor::{Kernel, Shape, Tensor};

/// Stride, dilation (atrous rate) and symmetric zero padding of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(stride: usize, dilation: usize, padding: usize) -> Result<Self> {
        if stride == 0 || dilation == 0 {
            return Err(invalid("stride and dilation must be >= 1"));
        }
        Ok(Self { stride, dilation, padding })
    }

    /// Stride 1 with `padding = dilation * (k - 1) / 2`, so output size equals input size.
    pub fn same(kernel_extent: usize, dilation: usize) -> Result<Self> {
        if kernel_extent % 2 == 0 {
            return Err(invalid("same padding needs an odd kernel extent"));
        }
        Self::new(1, dilation, dilation * (kernel_extent - 1) / 2)
    }

    pub fn output_extent(&self, input: usize, kernel_extent: usize) -> Result<usize> {
        let span = self.dilation * (kernel_extent - 1) + 1;
        let padded = input + 2 * self.padding;
        if padded < span {
            return Err(shape(format!(
                "input extent {input} with padding {} is smaller than the dilated kernel span {span}",
                self.padding
            )));
        }
        Ok((padded - span) / self.stride + 1)
    }

    pub fn output_shape(&self, input: Shape, kernel: &Kernel) -> Result<Shape> {
        Ok(Shape::new(
            self.output_extent(input.height, kernel.kh())?,
            self.output_extent(input.width, kernel.kw())?,
            kernel.out_channels(),
        ))
    }
}

/// Source coordinate of tap `tap` for output position `out`, or `None` when it falls in padding.
#[inline]
fn source(out: usize, tap: usize, spec: &ConvSpec, extent: usize) -> Option<usize> {
    let pos = (out * spec.stride + tap * spec.dilation) as isize - spec.padding as isize;
    (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
}

pub fn conv2d_forward(x: &Tensor, k: &Kernel, spec: &ConvSpec) -> Result<Tensor> {
    if x.channels() != k.in_channels() {
        return Err(invalid(format!(
            "input has {} channels, kernel expects {}",
            x.channels(),
            k.in_channels()
        )));
    }
    let in_shape = x.shape();
    let out_shape = spec.output_shape(in_shape, k)?;
    let (cin, cout) = (k.in_channels(), k.out_channels());
    let mut out = vec![0.0; out_shape.len()];
    let xv = x.values();

    for oh in 0..out_shape.height {
        for ow in 0..out_shape.width {
            let base = (oh * out_shape.width + ow) * cout;
            let acc = &mut out[base..base + cout];
            acc.copy_from_slice(k.bias());
            for i in 0..k.kh() {
                let Some(ih) = source(oh, i, spec, in_shape.height) else { continue };
                for j in 0..k.kw() {
                    let Some(iw) = source(ow, j, spec, in_shape.width) else { continue };
                    let px = &xv[(ih * in_shape.width + iw) * cin..][..cin];
                    for (c, &xval) in px.iter().enumerate() {
                        if xval == 0.0 {
                            continue;
                        }
                        for (a, &w) in acc.iter_mut().zip(k.row(i, j, c)) {
                            *a += w * xval;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(out_shape, out))
}

/// Gradient of `sum(gy ⊙ conv2d_forward(x))` with respect to `x`.
pub fn conv2d_input_grad(gy: &Tensor, k: &Kernel, spec: &ConvSpec, input_shape: Shape) -> Result<Tensor> {
    if input_shape.channels != k.in_channels() {
        return Err(invalid(format!(
            "input shape has {} channels, kernel expects {}",
            input_shape.channels,
            k.in_channels()
        )));
    }
    let out_shape = spec.output_shape(input_shape, k)?;
    if gy.shape() != out_shape {
        return Err(shape(format!("output gradient is {}, forward output is {out_shape}", gy.shape())));
    }
    let (cin, cout) = (k.in_channels(), k.out_channels());
    let mut gx = vec![0.0; input_shape.len()];
    let gv = gy.values();

    for oh in 0..out_shape.height {
        for ow in 0..out_shape.width {
            let g = &gv[(oh * out_shape.width + ow) * cout..][..cout];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            for i in 0..k.kh() {
                let Some(ih) = source(oh, i, spec, input_shape.height) else { continue };
                for j in 0..k.kw() {
                    let Some(iw) = source(ow, j, spec, input_shape.width) else { continue };
                    let dst = &mut gx[(ih * input_shape.width + iw) * cin..][..cin];
                    for (c, d) in dst.iter_mut().enumerate() {
                        *d += k.row(i, j, c).iter().zip(g).map(|(w, g)| w * g).sum::<f64>();
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(input_shape, gx))
}
