use crate::error::{shape, Result};
use crate::tensor::Tensor;

/// Which inputs were strictly positive in [`relu_forward`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReluMask {
    active: Vec<bool>,
}

impl ReluMask {
    pub fn active(&self) -> &[bool] {
        &self.active
    }
}

pub fn relu_forward(x: &Tensor) -> (Tensor, ReluMask) {
    let active: Vec<bool> = x.values().iter().map(|&v| v > 0.0).collect();
    let values = x.values().iter().map(|&v| v.max(0.0)).collect();
    (Tensor::from_parts(x.shape(), values), ReluMask { active })
}

/// Passes `gy` where the input was positive; the subgradient at 0 is 0.
pub fn relu_input_grad(gy: &Tensor, mask: &ReluMask) -> Result<Tensor> {
    if gy.values().len() != mask.active.len() {
        return Err(shape(format!(
            "gradient {} does not match ReLU mask of {} elements",
            gy.shape(),
            mask.active.len()
        )));
    }
    let values = gy
        .values()
        .iter()
        .zip(&mask.active)
        .map(|(&g, &on)| if on { g } else { 0.0 })
        .collect();
    Ok(Tensor::from_parts(gy.shape(), values))
}
