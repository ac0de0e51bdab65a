//! Just enough neural-network machinery for the Q-network and the
//! policy/value network: dense tensors, stride-1 valid convolutions, dense
//! layers, ReLU, softmax, hand-written reverse-mode gradients, and Adam.

mod adam;
mod layers;
mod network;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layers::{
    conv2d, conv2d_backward, dense, dense_backward, dense_backward_batch, log_softmax, relu, relu_backward,
    relu_in_place, softmax,
};
pub use network::{Architecture, ConvSpec, Network, NetworkOutput, OutputGrad, Trace};
pub use tensor::Tensor;
