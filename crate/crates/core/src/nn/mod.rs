//! Minimal CPU neural-network substrate: NCHW f32 tensors, layers with
//! explicit forward and backward passes, losses, Adam and checkpoints.

mod adam;
mod checkpoint;
mod conv;
mod gemm;
mod layers;
mod loss;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_params, read_tensors, write_tensors, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{col2im, im2col, Conv2d, ConvGeom, ConvTranspose2d};
pub use gemm::gemm;
pub use layers::{Dense, Flatten, MaxPool2d, Relu, ResidualBlock, Sequential};
pub use loss::{mse, softmax, softmax_cross_entropy};
pub use tensor::{Param, Tensor};

use crate::error::Result;
use crate::rng::Rng;
use rand::Rng as _;

/// A differentiable layer. Shapes passed to `forward*` carry a leading batch
/// dimension; `out_shape` and `macs` take the per-item shape.
pub trait Layer: Send + Sync {
    /// Inference pass. Leaves no state behind.
    fn forward(&self, x: &Tensor) -> Result<Tensor>;

    /// Training pass. Caches whatever `backward` needs.
    fn forward_train(&mut self, x: &Tensor) -> Result<Tensor>;

    /// Accumulates parameter gradients and returns the gradient at the input
    /// of the last `forward_train`.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;

    fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    /// Multiply-accumulates for one item of shape `input`.
    fn macs(&self, _input: &[usize]) -> u64 {
        0
    }

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

/// Uniform(±sqrt(3/fan_in)) weights, i.e. unit-variance preserving for
/// linear maps.
pub(crate) fn init_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let bound = (3.0 / fan_in.max(1) as f32).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Total parameter count.
pub fn param_count(params: &[&Param]) -> usize {
    params.iter().map(|p| p.value.len()).sum()
}

pub fn zero_grads(layer: &mut dyn Layer) {
    layer.params_mut().into_iter().for_each(Param::zero_grad);
}
