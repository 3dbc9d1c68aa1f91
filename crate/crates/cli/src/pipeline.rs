//! Experiment stages shared by the commands and the acceptance suite.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use idspace::cae::{train_cae_with, CaeModel, Descriptor, EpochLog, TrainReport};
use idspace::data::{
    crops_of, derive_seed, extract_avoided_part_crops, generate_scene_with, generate_scenes, load_dataset,
    make_negative_images, save_dataset, Dataset, InteractionImage, Scene, SceneConfig, Split,
};
use idspace::inference::{
    estimate_norm_densities, train_inference_with, InferenceEpochLog, InferenceModel, InferenceReport,
    NormDensityPair,
};

use crate::config::ExperimentConfig;

const NEGATIVE_STREAM: u64 = 0x4E45_4701;
const TEST_NEGATIVE_STREAM: u64 = 0x4E45_4702;
const BLADE_STREAM: u64 = 0xB1AD_0000;
const MAP_STREAM: u64 = 0x3A90_0000;

/// Prototypes whose objects carry a grip and a blade.
pub const GRIP_TOOL_PROTOTYPES: [usize; 3] = [2, 3, 4];
pub const CUP_PROTOTYPE: usize = 0;

/// The six dataset files of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    /// Interaction crops for CAE training.
    pub train: Dataset,
    /// Object-only windows aligned with `train`.
    pub train_objects: Dataset,
    pub test: Dataset,
    pub test_objects: Dataset,
    /// Negatives for training R.
    pub negatives: Dataset,
    /// Held-out negatives for densities and evaluation.
    pub test_negatives: Dataset,
}

pub const DATA_FILES: [&str; 6] = [
    "train.iids",
    "train_objects.iids",
    "test.iids",
    "test_objects.iids",
    "negatives.iids",
    "test_negatives.iids",
];

fn blade_windows(scenes: &[Scene], per_scene: usize, seed: u64) -> Result<Vec<InteractionImage>> {
    let mut out = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        out.extend(extract_avoided_part_crops(s, per_scene, derive_seed(seed, BLADE_STREAM + i as u64))?);
    }
    Ok(out)
}

fn split_data(config: &ExperimentConfig, split: Split) -> Result<(Dataset, Dataset, Vec<Scene>)> {
    let corpus = config.corpus();
    let scenes = generate_scenes(&corpus, split)?;
    let crops = crops_of(&scenes, &corpus, split)?;
    let mut inter = Dataset::new(crops.iter().map(|c| c.interaction.clone()).collect());
    let mut objects = Dataset::new(crops.into_iter().map(|c| c.object).collect());
    for d in [&mut inter, &mut objects] {
        d.split = Some(split);
        d.seed = Some(config.seed);
    }
    Ok((inter, objects, scenes))
}

/// Renders every dataset of an experiment.
pub fn generate(config: &ExperimentConfig) -> Result<ExperimentData> {
    config.validate()?;
    let (train, train_objects, train_scenes) = split_data(config, Split::Train)?;
    let (test, test_objects, test_scenes) = split_data(config, Split::Test)?;
    let mut negatives = make_negative_images(derive_seed(config.seed, NEGATIVE_STREAM), config.negatives)?;
    negatives.extend(blade_windows(&train_scenes, config.avoided_crops_per_scene, config.seed)?);
    let mut test_negatives = make_negative_images(derive_seed(config.seed, TEST_NEGATIVE_STREAM), config.test_negatives)?;
    test_negatives.extend(blade_windows(&test_scenes, config.avoided_crops_per_scene.min(1), config.seed ^ 1)?);
    let tag = |items: Vec<InteractionImage>, split| Dataset {
        items,
        split: Some(split),
        seed: Some(config.seed),
    };
    Ok(ExperimentData {
        train,
        train_objects,
        test,
        test_objects,
        negatives: tag(negatives, Split::Train),
        test_negatives: tag(test_negatives, Split::Test),
    })
}

impl ExperimentData {
    fn sets(&self) -> [&Dataset; 6] {
        [
            &self.train,
            &self.train_objects,
            &self.test,
            &self.test_objects,
            &self.negatives,
            &self.test_negatives,
        ]
    }

    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, set) in DATA_FILES.iter().zip(self.sets()) {
            let path = dir.join(name);
            save_dataset(set, &path).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            if !path.exists() {
                anyhow::bail!(idspace::Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing dataset {} (run `generate` first)", path.display()),
                )));
            }
            load_dataset(&path).with_context(|| format!("reading {}", path.display()))
        };
        Ok(Self {
            train: read(DATA_FILES[0])?,
            train_objects: read(DATA_FILES[1])?,
            test: read(DATA_FILES[2])?,
            test_objects: read(DATA_FILES[3])?,
            negatives: read(DATA_FILES[4])?,
            test_negatives: read(DATA_FILES[5])?,
        })
    }

    /// Held-out object images and ground truth split into a density half
    /// (even test scenes, first half of the negatives) and an evaluation
    /// half (odd test scenes, second half).
    pub fn held_out(&self, crops_per_scene: usize) -> HeldOut {
        let mut h = HeldOut::default();
        for (i, (o, t)) in self.test_objects.items.iter().zip(&self.test.items).enumerate() {
            if (i / crops_per_scene.max(1)) % 2 == 0 {
                h.density_positives.push(o.clone());
            } else {
                h.eval_positives.push(o.clone());
                h.eval_truth.push(t.clone());
            }
        }
        let half = self.test_negatives.items.len() / 2;
        h.density_negatives = self.test_negatives.items[..half].to_vec();
        h.eval_negatives = self.test_negatives.items[half..].to_vec();
        h
    }
}

#[derive(Clone, Debug, Default)]
pub struct HeldOut {
    pub density_positives: Vec<InteractionImage>,
    pub density_negatives: Vec<InteractionImage>,
    pub eval_positives: Vec<InteractionImage>,
    /// Interaction images matching `eval_positives`.
    pub eval_truth: Vec<InteractionImage>,
    pub eval_negatives: Vec<InteractionImage>,
}

pub fn train_cae_stage(
    config: &ExperimentConfig,
    lambda: f64,
    train: &[InteractionImage],
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(CaeModel, TrainReport)> {
    Ok(train_cae_with(train, &config.cae_config(lambda), on_epoch)?)
}

/// Object windows paired with the encoder's descriptors of their
/// interaction crops.
pub fn inference_pairs(cae: &CaeModel, data: &ExperimentData) -> Result<Vec<(InteractionImage, Descriptor)>> {
    let descriptors = cae.encode_images(&data.train.items)?;
    Ok(data.train_objects.items.iter().cloned().zip(descriptors).collect())
}

pub fn train_inference_stage(
    config: &ExperimentConfig,
    cae: &CaeModel,
    data: &ExperimentData,
    on_epoch: impl FnMut(&InferenceEpochLog),
) -> Result<(InferenceModel, InferenceReport)> {
    let pairs = inference_pairs(cae, data)?;
    Ok(train_inference_with(&pairs, &data.negatives.items, &config.inference_config(), on_epoch)?)
}

pub fn densities(model: &InferenceModel, held_out: &HeldOut) -> Result<NormDensityPair> {
    Ok(estimate_norm_densities(model, &held_out.density_positives, &held_out.density_negatives)?)
}

/// Hand-free scenes of `prototype` for map evaluations, on a canvas of the
/// configured size.
pub fn map_scenes(config: &ExperimentConfig, prototypes: &[usize], count: usize) -> Result<Vec<Scene>> {
    let sc = SceneConfig {
        width: config.scene_size,
        height: config.scene_size,
    };
    (0..count)
        .map(|i| {
            let p = prototypes[i % prototypes.len()];
            let seed = derive_seed(config.seed, MAP_STREAM + (p * 1000 + i) as u64);
            Ok(generate_scene_with(&sc, p, seed)?.without_hand())
        })
        .collect()
}
