//! Interaction descriptor spaces: a sparse convolutional autoencoder over
//! hand-object interaction images, an inference model from object
//! appearance to descriptors, synthetic data and evaluation metrics.

pub mod cae;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod metrics;
mod io;
pub mod nn;
pub mod sparsity;
pub mod sweep;

pub use cae::{CaeArch, CaeModel, CaeTrainConfig, CostBreakdown, Descriptor, TrainReport};
pub use checkpoint::Checkpoint;
pub use data::{Dataset, InteractionImage, Scene};
pub use error::{Error, Result};
pub use inference::{InferenceModel, InferenceTrainConfig};
pub use nn::{GradientTape, LayerParams, Network, Tensor};
pub use sparsity::sparsity_ratio;
