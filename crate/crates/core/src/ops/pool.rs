use crate::error::{invalid, shape, Result};
use crate::tensor::{Shape, Tensor};

/// Winning input offsets recorded by [`maxpool_forward`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolContext {
    input_shape: Shape,
    output_shape: Shape,
    argmax: Vec<usize>,
}

impl PoolContext {
    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape {
        self.output_shape
    }

    /// Flat input index that won each output element.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// 2×2 max pooling with stride 2. Ties go to the first element in scan order.
pub fn maxpool_forward(x: &Tensor) -> Result<(Tensor, PoolContext)> {
    let s = x.shape();
    if s.height % 2 != 0 || s.width % 2 != 0 {
        return Err(invalid(format!("2x2 max pooling needs even spatial dimensions, got {s}")));
    }
    let out_shape = Shape::new(s.height / 2, s.width / 2, s.channels);
    let mut out = Vec::with_capacity(out_shape.len());
    let mut argmax = Vec::with_capacity(out_shape.len());
    let xv = x.values();
    for oh in 0..out_shape.height {
        for ow in 0..out_shape.width {
            for c in 0..s.channels {
                let mut best_idx = x.index(2 * oh, 2 * ow, c);
                let mut best = xv[best_idx];
                for (dh, dw) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = x.index(2 * oh + dh, 2 * ow + dw, c);
                    if xv[idx] > best {
                        best = xv[idx];
                        best_idx = idx;
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    let ctx = PoolContext { input_shape: s, output_shape: out_shape, argmax };
    Ok((Tensor::from_parts(out_shape, out), ctx))
}

pub fn maxpool_input_grad(gy: &Tensor, ctx: &PoolContext) -> Result<Tensor> {
    if gy.shape() != ctx.output_shape {
        return Err(shape(format!(
            "gradient is {}, pooling context recorded {}",
            gy.shape(),
            ctx.output_shape
        )));
    }
    let mut gx = vec![0.0; ctx.input_shape.len()];
    for (&idx, &g) in ctx.argmax.iter().zip(gy.values()) {
        gx[idx] += g;
    }
    Ok(Tensor::from_parts(ctx.input_shape, gx))
}

pub fn global_avgpool_forward(x: &Tensor) -> Tensor {
    let s = x.shape();
    let mut sums = vec![0.0; s.channels];
    for px in x.values().chunks_exact(s.channels) {
        for (acc, v) in sums.iter_mut().zip(px) {
            *acc += v;
        }
    }
    let n = (s.height * s.width) as f64;
    sums.iter_mut().for_each(|v| *v /= n);
    Tensor::from_parts(Shape::new(1, 1, s.channels), sums)
}

pub fn global_avgpool_input_grad(gy: &Tensor, in_shape: Shape) -> Result<Tensor> {
    if gy.shape() != Shape::new(1, 1, in_shape.channels) {
        return Err(shape(format!("global pool gradient is {}, expected 1x1x{}", gy.shape(), in_shape.channels)));
    }
    let n = (in_shape.height * in_shape.width) as f64;
    let per: Vec<f64> = gy.values().iter().map(|g| g / n).collect();
    let values = per.iter().copied().cycle().take(in_shape.len()).collect();
    Ok(Tensor::from_parts(in_shape, values))
}
