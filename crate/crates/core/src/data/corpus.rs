//! Assembly of whole train/test corpora from the scene generator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Split;
use super::prototypes::PROTOTYPE_COUNT;
use super::scene::{derive_seed, extract_crops, generate_scene_with, CropSample, Scene, SceneConfig};
use crate::error::{config_err, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Training scenes, cycling through the prototypes.
    pub scenes: usize,
    pub crops_per_scene: usize,
    pub test_scenes: usize,
    pub test_crops_per_scene: usize,
    pub min_hand_fraction: f64,
    pub scene_size: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            scenes: 1680,
            crops_per_scene: 4,
            test_scenes: 200,
            test_crops_per_scene: 4,
            min_hand_fraction: 0.10,
            scene_size: 64,
            seed: 0,
        }
    }
}

fn split_stream(split: Split) -> u64 {
    match split {
        Split::Train => 0x7EA1_0000_0000,
        Split::Test => 0x7E57_0000_0000,
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.crops_per_scene == 0 {
            return config_err("corpus needs at least one training scene and crop");
        }
        if !(0.0..1.0).contains(&self.min_hand_fraction) {
            return config_err("min_hand_fraction must lie in [0, 1)");
        }
        if self.scene_size < 32 {
            return config_err("scene_size must be at least 32");
        }
        Ok(())
    }

    fn counts(&self, split: Split) -> (usize, usize) {
        match split {
            Split::Train => (self.scenes, self.crops_per_scene),
            Split::Test => (self.test_scenes, self.test_crops_per_scene),
        }
    }

    pub fn scene_seed(&self, split: Split, index: usize) -> u64 {
        derive_seed(self.seed, split_stream(split) + index as u64)
    }
}

/// Scenes of one split, in index order. Scene `i` shows prototype
/// `i mod 12`. Rendering runs in parallel; the output order is fixed.
pub fn generate_scenes(config: &CorpusConfig, split: Split) -> Result<Vec<Scene>> {
    config.validate()?;
    let (count, _) = config.counts(split);
    let scene_cfg = SceneConfig {
        width: config.scene_size,
        height: config.scene_size,
    };
    (0..count)
        .into_par_iter()
        .map(|i| generate_scene_with(&scene_cfg, i % PROTOTYPE_COUNT, config.scene_seed(split, i)))
        .collect()
}

/// Crops of every scene of a split, scene-major.
pub fn generate_crops(config: &CorpusConfig, split: Split) -> Result<Vec<CropSample>> {
    let scenes = generate_scenes(config, split)?;
    crops_of(&scenes, config, split)
}

pub fn crops_of(scenes: &[Scene], config: &CorpusConfig, split: Split) -> Result<Vec<CropSample>> {
    let (_, per_scene) = config.counts(split);
    let nested: Vec<Vec<CropSample>> = scenes
        .par_iter()
        .map(|s| extract_crops(s, per_scene, config.min_hand_fraction, s.seed))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_corpus_is_deterministic_and_labelled() {
        let cfg = CorpusConfig {
            scenes: 24,
            crops_per_scene: 2,
            test_scenes: 12,
            test_crops_per_scene: 1,
            ..CorpusConfig::default()
        };
        let a = generate_crops(&cfg, Split::Train).unwrap();
        assert_eq!(a.len(), 48);
        assert_eq!(a, generate_crops(&cfg, Split::Train).unwrap());
        for (i, c) in a.iter().enumerate() {
            assert_eq!(c.interaction.label, Some(((i / 2) % 12) as u8));
        }
        let t = generate_crops(&cfg, Split::Test).unwrap();
        assert_eq!(t.len(), 12);
        assert_ne!(t[0].interaction, a[0].interaction);
    }

    #[test]
    fn paper_scale_scene_count() {
        let cfg = CorpusConfig::default();
        assert_eq!(cfg.scenes, 12 * 140);
    }
}
