//! 2D arrays, convolution kernels and the convolutional forward model.

mod conv;
mod grid;
mod model;

pub use conv::{conv_full, corr_valid};
pub use grid::{Grid2, Shape};
pub use model::{fidelity_and_gradients, forward, FidelityGradients};

pub(crate) use conv::corr_valid_acc;
pub(crate) use model::{image_shape, residual};
