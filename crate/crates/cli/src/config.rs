//! Flat experiment configuration with built-in profiles.

use std::path::Path;

use anyhow::{bail, Context, Result};
use idspace::cae::{CaeArch, CaeTrainConfig};
use idspace::data::CorpusConfig;
use idspace::inference::{InferenceArch, InferenceTrainConfig};
use idspace::metrics::MeanShiftConfig;
use serde::{Deserialize, Serialize};

/// Every knob of an experiment. Serialized as flat TOML; unknown keys are
/// rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,

    pub scenes: usize,
    pub crops_per_scene: usize,
    pub test_scenes: usize,
    pub test_crops_per_scene: usize,
    pub min_hand_fraction: f64,
    pub scene_size: usize,
    /// Background and distractor negatives for training R.
    pub negatives: usize,
    /// Held-out negatives for density estimation and evaluation.
    pub test_negatives: usize,
    /// Blade windows per bladed training scene, added to R's negatives.
    pub avoided_crops_per_scene: usize,

    pub descriptor_dim: usize,
    pub beta: f64,
    pub lambda: f64,
    pub cae_lr: f64,
    pub cae_epochs: usize,
    pub cae_batch: usize,
    pub lr_decay_every: usize,
    pub lr_decay: f64,
    pub lambdas: Vec<f64>,

    pub inference_lr: f64,
    pub inference_epochs: usize,
    pub inference_batch: usize,

    /// Mean-shift bandwidth; half the median pairwise distance when absent.
    pub bandwidth: Option<f64>,
    pub stride: usize,
    pub n_angles: usize,
    /// Position weight for window clustering; balanced when absent.
    pub position_weight: Option<f64>,
    /// Object-only scenes per evaluation map family.
    pub map_scenes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    Smoke,
    Paper,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ExperimentConfig {
    pub fn paper() -> Self {
        Self {
            seed: 0,
            scenes: 1680,
            crops_per_scene: 4,
            test_scenes: 200,
            test_crops_per_scene: 4,
            min_hand_fraction: 0.10,
            scene_size: 64,
            negatives: 3000,
            test_negatives: 600,
            avoided_crops_per_scene: 2,
            descriptor_dim: 24,
            beta: 1.0,
            lambda: 1.0,
            cae_lr: 2e-4,
            cae_epochs: 20,
            cae_batch: 16,
            lr_decay_every: 20,
            lr_decay: 0.5,
            lambdas: vec![0.0, 0.1, 0.3, 1.0, 3.0, 10.0],
            inference_lr: 2e-4,
            inference_epochs: 20,
            inference_batch: 16,
            bandwidth: None,
            stride: 2,
            n_angles: 16,
            position_weight: None,
            map_scenes: 20,
        }
    }

    pub fn smoke() -> Self {
        Self {
            scenes: 50,
            test_scenes: 24,
            negatives: 100,
            test_negatives: 60,
            descriptor_dim: 8,
            cae_epochs: 5,
            inference_epochs: 5,
            lambdas: vec![0.0, 1.0],
            stride: 4,
            map_scenes: 2,
            ..Self::paper()
        }
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Smoke => Self::smoke(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).context("parsing experiment config")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus().validate()?;
        self.cae_config(self.lambda).validate()?;
        self.inference_config().validate()?;
        if self.negatives == 0 || self.test_negatives < 2 {
            bail!("negatives must be positive and test_negatives at least 2");
        }
        if self.test_scenes == 0 || self.test_crops_per_scene == 0 {
            bail!("the test split needs at least one scene and crop");
        }
        if self.stride == 0 || self.n_angles == 0 || self.map_scenes == 0 {
            bail!("stride, n_angles and map_scenes must be positive");
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                bail!("bandwidth must be positive, got {b}");
            }
        }
        Ok(())
    }

    pub fn corpus(&self) -> CorpusConfig {
        CorpusConfig {
            scenes: self.scenes,
            crops_per_scene: self.crops_per_scene,
            test_scenes: self.test_scenes,
            test_crops_per_scene: self.test_crops_per_scene,
            min_hand_fraction: self.min_hand_fraction,
            scene_size: self.scene_size,
            seed: self.seed,
        }
    }

    pub fn cae_config(&self, lambda: f64) -> CaeTrainConfig {
        CaeTrainConfig {
            arch: CaeArch::standard(self.descriptor_dim),
            beta: self.beta,
            lambda,
            epochs: self.cae_epochs,
            lr: self.cae_lr,
            batch_size: self.cae_batch,
            seed: self.seed,
            lr_decay_every: self.lr_decay_every,
            lr_decay: self.lr_decay,
        }
    }

    pub fn inference_config(&self) -> InferenceTrainConfig {
        InferenceTrainConfig {
            arch: InferenceArch::standard(self.descriptor_dim),
            epochs: self.inference_epochs,
            lr: self.inference_lr,
            batch_size: self.inference_batch,
            seed: self.seed,
            lr_decay_every: self.lr_decay_every,
            lr_decay: self.lr_decay,
        }
    }

    pub fn mean_shift(&self) -> MeanShiftConfig {
        MeanShiftConfig {
            bandwidth: self.bandwidth,
            ..MeanShiftConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_round_trip_through_toml() {
        for c in [ExperimentConfig::smoke(), ExperimentConfig::paper()] {
            c.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut text = ExperimentConfig::smoke().to_toml();
        text.push_str("bogus = 1\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
