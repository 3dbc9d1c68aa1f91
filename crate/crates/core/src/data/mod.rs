//! Synthetic interaction images: scene rendering, crops, negatives, pose
//! normalization and dataset files.

pub mod corpus;
pub mod dataset;
pub mod image;
pub mod negatives;
pub mod prototypes;
pub mod raster;
pub mod scene;
pub mod transform;

pub use corpus::{crops_of, generate_crops, generate_scenes, CorpusConfig};
pub use dataset::{decode_pgm, encode_pgm, encode_ppm, load_dataset, save_dataset, write_pgm, write_ppm, Dataset, Split};
pub use image::{mask_iou, Channel, InteractionImage, Pose, CHANNELS, IMAGE_SIZE, PLANE};
pub use negatives::make_negative_images;
pub use prototypes::{prototype, Prototype, PROTOTYPE_COUNT};
pub use scene::{
    derive_seed, extract_avoided_part_crops, extract_crops, extract_subimages, generate_scene, generate_scene_with,
    CropSample, Region, Scene, SceneConfig,
};
pub use transform::normalize_pose;
