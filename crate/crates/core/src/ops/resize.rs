//! Bilinear upsampling with half-pixel centers.
//!
//! Destination index `d` samples source coordinate `(d + 0.5) * in / out - 0.5`,
//! clamped to `[0, in - 1]`. Interpolation weights along each axis sum to one.

use crate::error::{invalid, shape, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn axis_taps(input: usize, output: usize) -> Vec<Tap> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            Tap { lo, hi, frac: src - lo as f64 }
        })
        .collect()
}

fn check_request(input: Shape, out_h: usize, out_w: usize) -> Result<()> {
    if out_h < input.height || out_w < input.width {
        return Err(invalid(format!(
            "bilinear upsampling cannot shrink {}x{} to {out_h}x{out_w}",
            input.height, input.width
        )));
    }
    Ok(())
}

pub fn bilinear_upsample_forward(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let s = x.shape();
    check_request(s, out_h, out_w)?;
    let out_shape = Shape::new(out_h, out_w, s.channels);
    if out_shape == s {
        return Ok(x.clone());
    }
    let (rows, cols) = (axis_taps(s.height, out_h), axis_taps(s.width, out_w));
    let c = s.channels;
    let xv = x.values();
    let mut out = vec![0.0; out_shape.len()];
    for (oy, ty) in rows.iter().enumerate() {
        for (ox, tx) in cols.iter().enumerate() {
            let dst = &mut out[(oy * out_w + ox) * c..][..c];
            let weights = [
                (ty.lo, tx.lo, (1.0 - ty.frac) * (1.0 - tx.frac)),
                (ty.lo, tx.hi, (1.0 - ty.frac) * tx.frac),
                (ty.hi, tx.lo, ty.frac * (1.0 - tx.frac)),
                (ty.hi, tx.hi, ty.frac * tx.frac),
            ];
            for (h, w, wt) in weights {
                if wt == 0.0 {
                    continue;
                }
                let src = &xv[(h * s.width + w) * c..][..c];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += wt * v;
                }
            }
        }
    }
    Ok(Tensor::from_parts(out_shape, out))
}

/// Transpose of the interpolation weights applied to `gy`.
pub fn bilinear_upsample_input_grad(gy: &Tensor, in_shape: Shape) -> Result<Tensor> {
    let g = gy.shape();
    if g.channels != in_shape.channels {
        return Err(shape(format!("gradient {g} and input {in_shape} disagree on channels")));
    }
    check_request(in_shape, g.height, g.width).map_err(|_| {
        shape(format!("gradient {g} is smaller than the upsampled input {in_shape}"))
    })?;
    if g == in_shape {
        return Ok(gy.clone());
    }
    let (rows, cols) = (axis_taps(in_shape.height, g.height), axis_taps(in_shape.width, g.width));
    let c = g.channels;
    let gv = gy.values();
    let mut gx = vec![0.0; in_shape.len()];
    for (oy, ty) in rows.iter().enumerate() {
        for (ox, tx) in cols.iter().enumerate() {
            let src = &gv[(oy * g.width + ox) * c..][..c];
            if src.iter().all(|&v| v == 0.0) {
                continue;
            }
            let weights = [
                (ty.lo, tx.lo, (1.0 - ty.frac) * (1.0 - tx.frac)),
                (ty.lo, tx.hi, (1.0 - ty.frac) * tx.frac),
                (ty.hi, tx.lo, ty.frac * (1.0 - tx.frac)),
                (ty.hi, tx.hi, ty.frac * tx.frac),
            ];
            for (h, w, wt) in weights {
                if wt == 0.0 {
                    continue;
                }
                let dst = &mut gx[(h * in_shape.width + w) * c..][..c];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += wt * v;
                }
            }
        }
    }
    Ok(Tensor::from_parts(in_shape, gx))
}
