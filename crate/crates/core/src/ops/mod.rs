//! Forward passes and input gradients for the layer types used by the
//! analysis networks. Weights are never differentiated.

mod activation;
mod conv;
mod pool;
mod resize;

pub use activation::{relu_forward, relu_input_grad, ReluMask};
pub use conv::{conv2d_forward, conv2d_input_grad, ConvSpec};
pub use pool::{
    global_avgpool_forward, global_avgpool_input_grad, maxpool_forward, maxpool_input_grad, PoolContext,
};
pub use resize::{bilinear_upsample_forward, bilinear_upsample_input_grad};
