use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cae::Descriptor;
use crate::checkpoint::Checkpoint;
use crate::data::{derive_seed, InteractionImage, IMAGE_SIZE, PLANE};
use crate::error::{config_err, Error, Result};
use crate::nn::{load_network, save_network, sgd_step, ModelRole, Network, NetworkBuilder, Tensor};

const EVAL_CHUNK: usize = 256;

/// Layer sizes of the inference network R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceArch {
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub hidden: usize,
    pub descriptor_dim: usize,
}

impl InferenceArch {
    /// conv(16, 5x5, s2) -> tanh -> conv(32, 3x3, s2) -> tanh -> 256 -> tanh -> d.
    pub fn standard(descriptor_dim: usize) -> Self {
        Self {
            conv1_filters: 16,
            conv1_kernel: 5,
            conv2_filters: 32,
            conv2_kernel: 3,
            hidden: 256,
            descriptor_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptor_dim == 0 || self.hidden == 0 || self.conv1_filters == 0 || self.conv2_filters == 0 {
            return config_err("inference layer sizes must be positive");
        }
        if self.conv1_kernel % 2 == 0 || self.conv2_kernel % 2 == 0 {
            return config_err("inference kernels must have odd size");
        }
        Ok(())
    }

    fn build(&self, seed: u64) -> Result<Network<f32>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkBuilder::new(&[1, IMAGE_SIZE, IMAGE_SIZE], &mut rng)
            .conv(self.conv1_filters, self.conv1_kernel, 2, self.conv1_kernel / 2)
            .tanh()
            .conv(self.conv2_filters, self.conv2_kernel, 2, self.conv2_kernel / 2)
            .tanh()
            .dense(self.hidden)
            .tanh()
            .dense(self.descriptor_dim)
            .build()
    }
}

/// The network R mapping an object-only appearance to a descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceModel {
    pub arch: InferenceArch,
    pub network: Network<f32>,
    pub seed: u64,
}

/// The single input plane of R: object appearance masked by the object
/// mask.
pub fn object_input(image: &InteractionImage) -> Vec<f32> {
    image
        .appearance()
        .iter()
        .zip(image.object_mask())
        .map(|(a, m)| a * m)
        .collect()
}

fn inputs_tensor(inputs: &[&[f32]]) -> Result<Tensor<f32>> {
    Tensor::stack(inputs, &[1, IMAGE_SIZE, IMAGE_SIZE])
}

impl InferenceModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_network(&self.network, ModelRole::Inference, path)
    }

    pub fn load(arch: InferenceArch, path: &Path) -> Result<Self> {
        let (network, role) = load_network(path)?;
        if role != ModelRole::Inference {
            return Err(Error::Format(format!("expected an inference model file, found {role:?}")));
        }
        let reference = Self::init(arch, 0)?;
        if !reference.network.same_structure(&network) {
            return config_err("inference network does not match the configured architecture");
        }
        Ok(Self { network, ..reference })
    }

    pub fn init(arch: InferenceArch, seed: u64) -> Result<Self> {
        let network = arch.build(seed)?;
        Ok(Self { arch, network, seed })
    }

    pub fn descriptor_dim(&self) -> usize {
        self.arch.descriptor_dim
    }

    /// R applied to prepared input planes.
    pub fn infer_planes(&self, planes: &[Vec<f32>]) -> Result<Vec<Descriptor>> {
        let mut out = Vec::with_capacity(planes.len());
        for chunk in planes.chunks(EVAL_CHUNK) {
            for p in chunk {
                if p.len() != PLANE {
                    return config_err(format!("input plane has {} values, expected {PLANE}", p.len()));
                }
            }
            let refs: Vec<&[f32]> = chunk.iter().map(Vec::as_slice).collect();
            let z = self.network.forward(&inputs_tensor(&refs)?)?;
            out.extend((0..z.batch()).map(|n| Descriptor::new(z.item(n).iter().map(|&v| v as f64).collect())));
        }
        Ok(out)
    }

    pub fn infer_batch(&self, images: &[InteractionImage]) -> Result<Vec<Descriptor>> {
        let planes: Vec<Vec<f32>> = images.iter().map(object_input).collect();
        self.infer_planes(&planes)
    }
}

/// `R(O)` for one object-only image.
pub fn infer_descriptor(model: &InferenceModel, object_image: &InteractionImage) -> Result<Descriptor> {
    Ok(model.infer_batch(std::slice::from_ref(object_image))?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceTrainConfig {
    pub arch: InferenceArch,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub lr_decay_every: usize,
    pub lr_decay: f64,
}

impl Default for InferenceTrainConfig {
    fn default() -> Self {
        Self {
            arch: InferenceArch::standard(24),
            epochs: 20,
            lr: 0.01,
            batch_size: 64,
            seed: 0,
            lr_decay_every: 20,
            lr_decay: 0.5,
        }
    }
}

impl InferenceTrainConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch.saturating_sub(1) / self.lr_decay_every) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if !(self.lr > 0.0) || self.batch_size == 0 || self.lr_decay_every == 0 || !(self.lr_decay > 0.0) {
            return config_err("lr, lr_decay and batch_size must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceEpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InferenceReport {
    pub epochs: Vec<InferenceEpochLog>,
    pub positives: usize,
    pub negatives: usize,
    pub wall_clock_secs: f64,
}

impl InferenceReport {
    /// `epoch,loss,lr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,lr\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{}", e.epoch, e.loss, e.lr);
        }
        s
    }
}

fn squared_error(z: &Tensor<f32>, targets: &[&[f32]]) -> f64 {
    (0..z.batch())
        .map(|n| {
            z.item(n)
                .iter()
                .zip(targets[n])
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

pub fn train_inference(
    positives: &[(InteractionImage, Descriptor)],
    negatives: &[InteractionImage],
    config: &InferenceTrainConfig,
) -> Result<(InferenceModel, InferenceReport)> {
    train_inference_with(positives, negatives, config, |_| {})
}

/// SGD on `sum |R(O) - t|^2` where `t` is the paired descriptor for a
/// positive and the zero vector for a negative.
pub fn train_inference_with(
    positives: &[(InteractionImage, Descriptor)],
    negatives: &[InteractionImage],
    config: &InferenceTrainConfig,
    mut on_epoch: impl FnMut(&InferenceEpochLog),
) -> Result<(InferenceModel, InferenceReport)> {
    config.validate()?;
    if positives.is_empty() {
        return config_err("inference training needs at least one positive pair");
    }
    let d = config.arch.descriptor_dim;
    if let Some((_, bad)) = positives.iter().find(|(_, t)| t.dim() != d) {
        return config_err(format!(
            "descriptor dimension {} does not match configured d = {d}",
            bad.dim()
        ));
    }
    let start = Instant::now();
    let inputs: Vec<Vec<f32>> = positives
        .iter()
        .map(|(o, _)| object_input(o))
        .chain(negatives.iter().map(object_input))
        .collect();
    let zero = vec![0.0f32; d];
    let targets: Vec<Vec<f32>> = positives
        .iter()
        .map(|(_, t)| t.values.iter().map(|&v| v as f32).collect())
        .chain(negatives.iter().map(|_| zero.clone()))
        .collect();

    let mut model = InferenceModel::init(config.arch.clone(), config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x1_4F));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut report = InferenceReport {
        positives: positives.len(),
        negatives: negatives.len(),
        ..Default::default()
    };

    let mut loss0 = 0.0;
    for chunk in order.chunks(EVAL_CHUNK) {
        let x: Vec<&[f32]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
        let t: Vec<&[f32]> = chunk.iter().map(|&i| targets[i].as_slice()).collect();
        loss0 += squared_error(&model.network.forward(&inputs_tensor(&x)?)?, &t);
    }
    let log0 = InferenceEpochLog {
        epoch: 0,
        loss: loss0,
        lr: config.lr_at(1),
    };
    on_epoch(&log0);
    report.epochs.push(log0);

    for epoch in 1..=config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let checkpoint = model.clone();
        let mut loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x: Vec<&[f32]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let t: Vec<&[f32]> = chunk.iter().map(|&i| targets[i].as_slice()).collect();
            let rec = model.network.forward_recorded(&inputs_tensor(&x)?)?;
            let z = rec.output();
            let batch_loss = squared_error(z, &t);
            let mut dz = z.clone();
            for n in 0..dz.batch() {
                for (g, &tv) in dz.item_mut(n).iter_mut().zip(t[n]) {
                    *g = 2.0 * (*g - tv);
                }
            }
            let back = model.network.backward(&rec, &dz)?;
            if !batch_loss.is_finite() || !back.tape.is_finite() {
                return Err(Error::NumericalAbort {
                    epoch,
                    reason: format!("non-finite inference loss {batch_loss}"),
                    checkpoint: Some(Box::new(Checkpoint::Inference(checkpoint))),
                });
            }
            sgd_step(&mut model.network, &back.tape, lr as f32)?;
            loss += batch_loss;
        }
        let log = InferenceEpochLog { epoch, loss, lr };
        on_epoch(&log);
        report.epochs.push(log);
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}
