//! Minimal tensor and neural-network substrate: dense and 1-D convolution
//! layers, the activations the agents use, reverse-mode gradients through a
//! fixed layer stack, RMSprop/Adam, and WGAN weight clipping.

mod activation;
mod layer;
mod network;
mod optim;
mod tensor;

pub use activation::{leaky_relu, leaky_relu_grad, symlog, symlog_grad, Activation, LEAKY_SLOPE};
pub use layer::{Layer, LayerKind, LayerSpec};
pub use network::{Grads, Network, Tape};
pub use optim::{clip_weights, Optimizer, OptimizerKind};
pub use tensor::Tensor;
