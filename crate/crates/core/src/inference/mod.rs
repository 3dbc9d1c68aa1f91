//! The inference model R, norm-based likelihood and its evaluations.

mod density;
mod eval;
mod model;

pub use density::{
    estimate_norm_densities, inferred_norms, interpolate, kde_at, likelihood, silverman_bandwidth, trapezoid, Density,
    NormDensityPair, DENSITY_FLOOR, GRID_POINTS, MIN_BANDWIDTH,
};
pub use eval::{
    balanced_position_weight, channel_psnr, infer_interaction_image, infer_interaction_images, likelihood_map,
    position_descriptor_cluster, psnr_eval, rotation_sweep_infer, window_center, window_grid, ChannelPsnr, ClusterMap,
    LikelihoodMap, PsnrReport, RotationResult, DEFAULT_ANGLES, LIKELIHOOD_THRESHOLD, PSNR_CAP_DB, PSNR_CSV_HEADER,
};
pub use model::{
    infer_descriptor, object_input, train_inference, train_inference_with, InferenceArch, InferenceEpochLog,
    InferenceModel, InferenceReport, InferenceTrainConfig,
};
