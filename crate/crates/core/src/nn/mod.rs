//! Minimal deterministic neural-network substrate.

mod layer;
mod network;
pub mod serialize;
mod tensor;

pub use layer::{activation_forward, conv2d_forward, dense_forward, Activation, Conv2d, Dense, Layer, LayerParams};
pub use network::{sgd_step, Backward, ForwardRecord, GradientTape, Network, NetworkBuilder, ParamGrad};
pub use serialize::{decode_network, encode_network, load_network, save_network, ModelRole};
pub use tensor::{Scalar, Tensor};
