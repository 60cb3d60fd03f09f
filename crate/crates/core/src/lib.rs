pub mod advisor;
pub mod cli;
pub mod config;
pub mod erf;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod imageio;
pub mod ops;
pub mod report;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Kernel, Shape, Tensor};
