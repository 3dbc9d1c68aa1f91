//! Sparse convolutional autoencoder: encoder E, decoder D and the cost
//! `C = beta * C_err + lambda * C_sparse`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{InteractionImage, CHANNELS, IMAGE_SIZE};
use crate::error::{config_err, Error, Result};
use crate::nn::{load_network, save_network, sgd_step, ModelRole, Activation, GradientTape, Network, NetworkBuilder, Scalar, Tensor};
use crate::sparsity::{l1_norm, l2_norm, sparsity_ratio, sparsity_ratio_gradient_into};

/// Images per forward pass when evaluating large sets.
const EVAL_CHUNK: usize = 256;

/// A point in the interaction descriptor space. The zero vector is the
/// invalid descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub values: Vec<f64>,
}

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn invalid(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn is_invalid(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sparsity_ratio(&self) -> f64 {
        sparsity_ratio(&self.values)
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Layer sizes of the encoder and decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeArch {
    pub channels: usize,
    pub size: usize,
    pub conv_filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub encoder_hidden: Vec<usize>,
    pub descriptor_dim: usize,
    pub decoder_hidden: Vec<usize>,
    /// Optional nonlinearity on the descriptor layer.
    pub descriptor_activation: Option<Activation>,
}

impl CaeArch {
    /// conv(16, 5x5, stride 2) -> tanh -> 512 -> tanh -> 128 -> tanh -> d;
    /// decoder d -> 128 -> tanh -> 512 -> tanh -> 3072 -> sigmoid.
    pub fn standard(descriptor_dim: usize) -> Self {
        Self {
            channels: CHANNELS,
            size: IMAGE_SIZE,
            conv_filters: 16,
            kernel: 5,
            stride: 2,
            pad: 2,
            encoder_hidden: vec![512, 128],
            descriptor_dim,
            decoder_hidden: vec![128, 512],
            descriptor_activation: None,
        }
    }

    /// Small single-channel 8x8 network (d = 4, 430 parameters) for
    /// gradient checks.
    pub fn reduced() -> Self {
        Self {
            channels: 1,
            size: 8,
            conv_filters: 2,
            kernel: 3,
            stride: 2,
            pad: 1,
            encoder_hidden: vec![3, 3],
            descriptor_dim: 4,
            decoder_hidden: vec![3, 3],
            descriptor_activation: None,
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.channels, self.size, self.size]
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptor_dim == 0 {
            return config_err("descriptor dimension must be positive");
        }
        if self.encoder_hidden.iter().chain(&self.decoder_hidden).any(|&h| h == 0) {
            return config_err("hidden layer sizes must be positive");
        }
        Ok(())
    }

    fn build<T: Scalar>(&self, rng: &mut ChaCha8Rng) -> Result<(Network<T>, Network<T>)> {
        self.validate()?;
        let mut enc = NetworkBuilder::new(&self.input_shape(), &mut *rng)
            .conv(self.conv_filters, self.kernel, self.stride, self.pad)
            .tanh();
        for &h in &self.encoder_hidden {
            enc = enc.dense(h).tanh();
        }
        enc = enc.dense(self.descriptor_dim);
        if let Some(act) = self.descriptor_activation {
            enc = enc.activation(act);
        }
        let encoder = enc.build()?;

        let mut dec = NetworkBuilder::new(&[self.descriptor_dim], &mut *rng);
        for &h in &self.decoder_hidden {
            dec = dec.dense(h).tanh();
        }
        let decoder = dec
            .dense(self.channels * self.size * self.size)
            .sigmoid()
            .reshape(&self.input_shape())
            .build()?;
        Ok((encoder, decoder))
    }
}

/// `C_err`, `C_sparse` and their weighted sum for one batch or set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub c_err: f64,
    pub c_sparse: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn is_finite(&self) -> bool {
        self.c_err.is_finite() && self.c_sparse.is_finite() && self.total.is_finite()
    }
}

/// `beta * c_err + lambda * c_sparse`; negative weights are rejected.
pub fn combine_costs(c_err: f64, c_sparse: f64, beta: f64, lambda: f64) -> Result<f64> {
    if !(beta >= 0.0) || !(lambda >= 0.0) {
        return config_err(format!(
            "cost weights must be non-negative, got beta={beta} lambda={lambda}"
        ));
    }
    Ok(beta * c_err + lambda * c_sparse)
}

/// Encoder and decoder parameters with the cost weights used to train them.
#[derive(Clone, Debug, PartialEq)]
pub struct CaeModel<T = f32> {
    pub arch: CaeArch,
    pub encoder: Network<T>,
    pub decoder: Network<T>,
    pub beta: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl<T: Scalar> CaeModel<T> {
    pub fn init(arch: CaeArch, beta: f64, lambda: f64, seed: u64) -> Result<Self> {
        combine_costs(0.0, 0.0, beta, lambda)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (encoder, decoder) = arch.build(&mut rng)?;
        Ok(Self {
            arch,
            encoder,
            decoder,
            beta,
            lambda,
            seed,
        })
    }

    pub fn descriptor_dim(&self) -> usize {
        self.arch.descriptor_dim
    }

    /// Wraps trained networks, checking them against `arch`.
    pub fn from_networks(
        arch: CaeArch,
        encoder: Network<T>,
        decoder: Network<T>,
        beta: f64,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        let reference = Self::init(arch, beta, lambda, seed)?;
        if !reference.encoder.same_structure(&encoder) || !reference.decoder.same_structure(&decoder) {
            return config_err("encoder or decoder does not match the configured architecture");
        }
        Ok(Self {
            encoder,
            decoder,
            ..reference
        })
    }

    pub fn cast<U: Scalar>(&self) -> CaeModel<U> {
        CaeModel {
            arch: self.arch.clone(),
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
            beta: self.beta,
            lambda: self.lambda,
            seed: self.seed,
        }
    }

    /// `[N, C, S, S]` images to `[N, d]` descriptors.
    pub fn encode_batch(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        self.encoder.forward(images)
    }

    /// `[N, d]` descriptors to `[N, C, S, S]` images.
    pub fn decode_batch(&self, descriptors: &Tensor<T>) -> Result<Tensor<T>> {
        self.decoder.forward(descriptors)
    }

    fn batch_costs(&self, images: &Tensor<T>, z: &Tensor<T>, y: &Tensor<T>) -> (f64, f64) {
        let c_err: f64 = images
            .data()
            .iter()
            .zip(y.data())
            .map(|(&a, &b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum();
        let c_sparse: f64 = (0..z.batch()).map(|n| sparsity_ratio(z.item(n))).sum();
        (c_err, c_sparse)
    }

    /// Costs of one batch under the model's own weights.
    pub fn costs(&self, images: &Tensor<T>) -> Result<CostBreakdown> {
        let z = self.encode_batch(images)?;
        let y = self.decode_batch(&z)?;
        let (c_err, c_sparse) = self.batch_costs(images, &z, &y);
        Ok(CostBreakdown {
            c_err,
            c_sparse,
            total: combine_costs(c_err, c_sparse, self.beta, self.lambda)?,
        })
    }

    /// Costs and the gradients of `C` with respect to every encoder and
    /// decoder parameter.
    pub fn cost_and_gradients(
        &self,
        images: &Tensor<T>,
    ) -> Result<(CostBreakdown, GradientTape<T>, GradientTape<T>)> {
        let enc_rec = self.encoder.forward_recorded(images)?;
        let z = enc_rec.output();
        let dec_rec = self.decoder.forward_recorded(z)?;
        let y = dec_rec.output();
        let (c_err, c_sparse) = self.batch_costs(images, z, y);
        let breakdown = CostBreakdown {
            c_err,
            c_sparse,
            total: combine_costs(c_err, c_sparse, self.beta, self.lambda)?,
        };

        let two_beta = T::from_f64(2.0 * self.beta);
        let mut dy = y.clone();
        for (g, &x) in dy.data_mut().iter_mut().zip(images.data()) {
            *g = two_beta * (*g - x);
        }
        let dec_back = self.decoder.backward(&dec_rec, &dy)?;
        let mut dz = dec_back.input_grad;
        if self.lambda > 0.0 {
            let lambda = T::from_f64(self.lambda);
            for n in 0..z.batch() {
                sparsity_ratio_gradient_into(z.item(n), lambda, dz.item_mut(n));
            }
        }
        let enc_back = self.encoder.backward(&enc_rec, &dz)?;
        Ok((breakdown, enc_back.tape, dec_back.tape))
    }
}

/// Stacks images into a `[N, 3, 32, 32]` batch.
pub fn images_to_tensor(images: &[&InteractionImage]) -> Result<Tensor<f32>> {
    let slices: Vec<&[f32]> = images.iter().map(|i| i.as_slice()).collect();
    Tensor::stack(&slices, &[CHANNELS, IMAGE_SIZE, IMAGE_SIZE])
}

fn nonempty(images: &[InteractionImage]) -> Result<()> {
    if images.is_empty() {
        return config_err("batch must not be empty");
    }
    Ok(())
}

impl CaeModel<f32> {
    /// Writes encoder and decoder as role-tagged model files.
    pub fn save(&self, encoder_path: &Path, decoder_path: &Path) -> Result<()> {
        save_network(&self.encoder, ModelRole::Encoder, encoder_path)?;
        save_network(&self.decoder, ModelRole::Decoder, decoder_path)
    }

    /// Reads a model written by [`CaeModel::save`].
    pub fn load(arch: CaeArch, beta: f64, lambda: f64, encoder_path: &Path, decoder_path: &Path) -> Result<Self> {
        let (encoder, enc_role) = load_network(encoder_path)?;
        let (decoder, dec_role) = load_network(decoder_path)?;
        if enc_role != ModelRole::Encoder || dec_role != ModelRole::Decoder {
            return Err(Error::Format(format!(
                "expected encoder and decoder files, found {enc_role:?} and {dec_role:?}"
            )));
        }
        Self::from_networks(arch, encoder, decoder, beta, lambda, 0)
    }

    fn check_image_arch(&self) -> Result<()> {
        if self.arch.input_shape() != [CHANNELS, IMAGE_SIZE, IMAGE_SIZE] {
            return config_err(format!(
                "model input {:?} is not an interaction image",
                self.arch.input_shape()
            ));
        }
        Ok(())
    }

    pub fn encode(&self, image: &InteractionImage) -> Result<Descriptor> {
        Ok(self.encode_images(std::slice::from_ref(image))?.remove(0))
    }

    pub fn encode_images(&self, images: &[InteractionImage]) -> Result<Vec<Descriptor>> {
        self.check_image_arch()?;
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(EVAL_CHUNK) {
            let refs: Vec<&InteractionImage> = chunk.iter().collect();
            let z = self.encode_batch(&images_to_tensor(&refs)?)?;
            out.extend((0..z.batch()).map(|n| Descriptor::new(z.item(n).iter().map(|&v| v as f64).collect())));
        }
        Ok(out)
    }

    /// Decodes one descriptor into an interaction image with every value
    /// strictly inside (0, 1).
    pub fn decode(&self, descriptor: &Descriptor) -> Result<InteractionImage> {
        self.check_image_arch()?;
        if descriptor.dim() != self.descriptor_dim() {
            return config_err(format!(
                "descriptor has dimension {}, decoder expects {}",
                descriptor.dim(),
                self.descriptor_dim()
            ));
        }
        let z = Tensor::from_f64_slice(&[1, descriptor.dim()], &descriptor.values)?;
        let y = self.decode_batch(&z)?;
        let data = y
            .into_data()
            .into_iter()
            .map(|v| v.clamp(f32::MIN_POSITIVE, 1.0 - f32::EPSILON / 2.0))
            .collect();
        InteractionImage::from_raw(data)
    }

    pub fn reconstruct(&self, image: &InteractionImage) -> Result<InteractionImage> {
        let d = self.encode(image)?;
        let out = self.decode(&d)?;
        Ok(out.with_label(image.label).with_pose(image.pose))
    }

    /// Costs over a whole image set, evaluated in chunks.
    pub fn evaluate(&self, images: &[InteractionImage]) -> Result<CostBreakdown> {
        nonempty(images)?;
        let (mut c_err, mut c_sparse) = (0.0, 0.0);
        for chunk in images.chunks(EVAL_CHUNK) {
            let refs: Vec<&InteractionImage> = chunk.iter().collect();
            let c = self.costs(&images_to_tensor(&refs)?)?;
            c_err += c.c_err;
            c_sparse += c.c_sparse;
        }
        Ok(CostBreakdown {
            c_err,
            c_sparse,
            total: combine_costs(c_err, c_sparse, self.beta, self.lambda)?,
        })
    }
}

/// `sum_I |I - D(E(I))|^2` over pixels and channels.
pub fn reconstruction_cost(model: &CaeModel, batch: &[InteractionImage]) -> Result<f64> {
    Ok(model.evaluate(batch)?.c_err)
}

/// `sum_I (|E(I)|_1 / |E(I)|_2)^2`.
pub fn sparseness_cost(model: &CaeModel, batch: &[InteractionImage]) -> Result<f64> {
    Ok(model.evaluate(batch)?.c_sparse)
}

/// `beta * C_err + lambda * C_sparse` with explicit weights.
pub fn total_cost(model: &CaeModel, batch: &[InteractionImage], beta: f64, lambda: f64) -> Result<f64> {
    let c = model.evaluate(batch)?;
    combine_costs(c.c_err, c.c_sparse, beta, lambda)
}

/// Plain L1 penalty `sum_I |E(I)|_1`, kept as the baseline the ratio
/// measure replaces. It shrinks with the descriptor scale.
pub fn l1_penalty_cost(model: &CaeModel, batch: &[InteractionImage]) -> Result<f64> {
    nonempty(batch)?;
    Ok(model.encode_images(batch)?.iter().map(|d| l1_norm(&d.values)).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeTrainConfig {
    pub arch: CaeArch,
    pub beta: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Halve (by `lr_decay`) the learning rate every this many epochs.
    pub lr_decay_every: usize,
    pub lr_decay: f64,
}

impl Default for CaeTrainConfig {
    fn default() -> Self {
        Self {
            arch: CaeArch::standard(24),
            beta: 1.0,
            lambda: 1.0,
            epochs: 20,
            lr: 0.01,
            batch_size: 64,
            seed: 0,
            lr_decay_every: 20,
            lr_decay: 0.5,
        }
    }
}

impl CaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        combine_costs(0.0, 0.0, self.beta, self.lambda)?;
        if !(self.lr > 0.0) || self.batch_size == 0 || self.lr_decay_every == 0 || !(self.lr_decay > 0.0) {
            return config_err("lr, lr_decay and batch_size must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch.saturating_sub(1) / self.lr_decay_every) as i32)
    }
}

/// Costs logged for one epoch. Epoch 0 is the untrained model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub c_err: f64,
    pub c_sparse: f64,
    pub c: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }

    /// `epoch,c_err,c_sparse,c,lr`, one row per logged epoch.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,c_err,c_sparse,c,lr\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.c_err, e.c_sparse, e.c, e.lr);
        }
        s
    }
}

pub fn train_cae(images: &[InteractionImage], config: &CaeTrainConfig) -> Result<(CaeModel, TrainReport)> {
    train_cae_with(images, config, |_| {})
}

/// Mini-batch SGD on `C`. Rows 1.. of the report hold the costs
/// accumulated over each epoch's batches, taken before each update.
pub fn train_cae_with(
    images: &[InteractionImage],
    config: &CaeTrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(CaeModel, TrainReport)> {
    nonempty(images)?;
    config.validate()?;
    let start = Instant::now();
    let mut model = CaeModel::<f32>::init(config.arch.clone(), config.beta, config.lambda, config.seed)?;
    model.check_image_arch()?;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::data::derive_seed(config.seed, 0x5_6D));
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut report = TrainReport::default();

    let initial = model.evaluate(images)?;
    let log0 = EpochLog {
        epoch: 0,
        c_err: initial.c_err,
        c_sparse: initial.c_sparse,
        c: initial.total,
        lr: config.lr_at(1),
    };
    on_epoch(&log0);
    report.epochs.push(log0);

    for epoch in 1..=config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let checkpoint = model.clone();
        let abort = |reason: String| Error::NumericalAbort {
            epoch,
            reason,
            checkpoint: Some(Box::new(Checkpoint::Cae(checkpoint.clone()))),
        };
        let (mut c_err, mut c_sparse) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let refs: Vec<&InteractionImage> = chunk.iter().map(|&i| &images[i]).collect();
            let x = images_to_tensor(&refs)?;
            let (cost, g_enc, g_dec) = model.cost_and_gradients(&x)?;
            if !cost.is_finite() {
                return Err(abort(format!("non-finite cost {cost:?}")));
            }
            if !g_enc.is_finite() || !g_dec.is_finite() {
                return Err(abort("non-finite gradient".into()));
            }
            sgd_step(&mut model.encoder, &g_enc, lr as f32)?;
            sgd_step(&mut model.decoder, &g_dec, lr as f32)?;
            c_err += cost.c_err;
            c_sparse += cost.c_sparse;
        }
        let log = EpochLog {
            epoch,
            c_err,
            c_sparse,
            c: combine_costs(c_err, c_sparse, config.beta, config.lambda)?,
            lr,
        };
        on_epoch(&log);
        report.epochs.push(log);
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{extract_subimages, generate_scene};

    fn few_images(n: usize) -> Vec<InteractionImage> {
        (0..n)
            .flat_map(|i| extract_subimages(&generate_scene(i % 12, i as u64).unwrap(), 1, 0.1, 0).unwrap())
            .collect()
    }

    fn small_arch() -> CaeArch {
        CaeArch {
            conv_filters: 4,
            encoder_hidden: vec![32, 16],
            decoder_hidden: vec![16, 32],
            ..CaeArch::standard(8)
        }
    }

    #[test]
    fn encode_is_deterministic_and_finite_on_zero_image() {
        let m = CaeModel::<f32>::init(CaeArch::standard(24), 1.0, 1.0, 5).unwrap();
        let img = &few_images(1)[0];
        assert_eq!(m.encode(img).unwrap(), m.encode(img).unwrap());
        let z = m.encode(&InteractionImage::zeros()).unwrap();
        assert_eq!(z.dim(), 24);
        assert!(z.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn decode_range_and_dimension_check() {
        let m = CaeModel::<f32>::init(small_arch(), 1.0, 0.0, 2).unwrap();
        for scale in [0.0, 1.0, 50.0, 1e6] {
            let out = m.decode(&Descriptor::new(vec![scale; 8])).unwrap();
            assert!(out.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(m.decode(&Descriptor::new(vec![0.0; 7])).is_err());
    }

    #[test]
    fn cost_weights() {
        assert_eq!(combine_costs(0.5, 3.0, 1.0, 2.0).unwrap(), 6.5);
        assert_eq!(combine_costs(0.5, 3.0, 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(combine_costs(0.5, 3.0, 0.0, 1.0).unwrap(), 3.0);
        assert!(combine_costs(0.5, 3.0, -1.0, 1.0).is_err());
        assert!(CaeModel::<f32>::init(small_arch(), 1.0, -0.1, 0).is_err());
    }

    #[test]
    fn reconstruction_cost_matches_pixel_loop() {
        let m = CaeModel::<f32>::init(small_arch(), 1.0, 0.3, 9).unwrap();
        let imgs = few_images(5);
        let mut oracle = 0.0f64;
        for img in &imgs {
            let rec = m.decode_batch(&m.encode_batch(&images_to_tensor(&[img]).unwrap()).unwrap()).unwrap();
            for (a, b) in img.as_slice().iter().zip(rec.data()) {
                let d = *a as f64 - *b as f64;
                oracle += d * d;
            }
        }
        let c = reconstruction_cost(&m, &imgs).unwrap();
        assert!((c - oracle).abs() <= 1e-6 * oracle);
        let total = total_cost(&m, &imgs, 1.0, 0.3).unwrap();
        let sparse = sparseness_cost(&m, &imgs).unwrap();
        assert_eq!(total, 1.0 * c + 0.3 * sparse);
    }

    #[test]
    fn sparseness_cost_is_additive() {
        let m = CaeModel::<f32>::init(small_arch(), 1.0, 1.0, 4).unwrap();
        let imgs = few_images(6);
        let all = sparseness_cost(&m, &imgs).unwrap();
        let parts = sparseness_cost(&m, &imgs[..2]).unwrap() + sparseness_cost(&m, &imgs[2..]).unwrap();
        assert!((all - parts).abs() <= 1e-9 * all);
    }

    #[test]
    fn l1_baseline_vs_ratio_under_rescaling() {
        // halving the last encoder layer halves every descriptor
        let mut m = CaeModel::<f32>::init(small_arch(), 1.0, 1.0, 4).unwrap();
        let imgs = few_images(4);
        let l1 = l1_penalty_cost(&m, &imgs).unwrap();
        let ratio = sparseness_cost(&m, &imgs).unwrap();
        let n = m.encoder.param_tensors_mut().len();
        for t in m.encoder.param_tensors_mut().into_iter().skip(n - 2) {
            t.data_mut().iter_mut().for_each(|v| *v *= 0.5);
        }
        let l1_half = l1_penalty_cost(&m, &imgs).unwrap();
        assert!((l1_half - 0.5 * l1).abs() <= 1e-5 * l1);
        assert!((sparseness_cost(&m, &imgs).unwrap() - ratio).abs() <= 1e-4 * ratio);
    }

    #[test]
    fn empty_batch_rejected() {
        let m = CaeModel::<f32>::init(small_arch(), 1.0, 1.0, 4).unwrap();
        assert!(reconstruction_cost(&m, &[]).is_err());
        assert!(train_cae(&[], &CaeTrainConfig::default()).is_err());
    }

    #[test]
    fn report_csv_header() {
        let r = TrainReport {
            epochs: vec![EpochLog {
                epoch: 0,
                c_err: 2.0,
                c_sparse: 3.0,
                c: 5.0,
                lr: 0.01,
            }],
            wall_clock_secs: 0.0,
        };
        assert_eq!(r.to_csv(), "epoch,c_err,c_sparse,c,lr\n0,2,3,5,0.01\n");
    }
}
