use idspace::cae::{train_cae, CaeArch, CaeModel, CaeTrainConfig, Descriptor};
use idspace::data::{extract_crops, generate_scene, make_negative_images, InteractionImage};
use idspace::inference::{
    infer_descriptor, kde_at, likelihood_map, rotation_sweep_infer, train_inference, window_grid, InferenceArch,
    InferenceModel, InferenceTrainConfig, NormDensityPair,
};
use idspace::sparsity_ratio;

fn small_arch() -> CaeArch {
    CaeArch {
        conv_filters: 4,
        encoder_hidden: vec![32, 16],
        decoder_hidden: vec![16, 32],
        ..CaeArch::standard(8)
    }
}

fn crops(n: usize) -> (Vec<InteractionImage>, Vec<InteractionImage>) {
    let samples: Vec<_> = (0..n)
        .flat_map(|i| extract_crops(&generate_scene(i % 12, i as u64).unwrap(), 1, 0.1, i as u64).unwrap())
        .collect();
    let inter = samples.iter().map(|c| c.interaction.clone()).collect();
    let objects = samples.into_iter().map(|c| c.object).collect();
    (inter, objects)
}

fn config(lambda: f64, epochs: usize) -> CaeTrainConfig {
    CaeTrainConfig {
        arch: small_arch(),
        lambda,
        epochs,
        lr: 2e-4,
        batch_size: 8,
        seed: 3,
        ..CaeTrainConfig::default()
    }
}

#[test]
fn short_run_reduces_reconstruction_cost() {
    let (images, _) = crops(50);
    let (_, report) = train_cae(&images, &CaeTrainConfig { lr: 2e-3, ..config(1.0, 5) }).unwrap();
    let first = report.epochs[0].c_err;
    let last = report.last().unwrap().c_err;
    assert!(last <= 0.8 * first, "C_err {first} -> {last}");
}

#[test]
fn identical_seeds_give_identical_models() {
    let (images, _) = crops(24);
    let (a, _) = train_cae(&images, &config(1.0, 2)).unwrap();
    let (b, _) = train_cae(&images, &config(1.0, 2)).unwrap();
    assert_eq!(a.encoder, b.encoder);
    assert_eq!(a.decoder, b.decoder);
}

#[test]
fn sparseness_weight_lowers_descriptor_ratio() {
    let (images, _) = crops(60);
    let mean_ratio = |m: &CaeModel| {
        let d = m.encode_images(&images).unwrap();
        d.iter().map(Descriptor::sparsity_ratio).sum::<f64>() / d.len() as f64
    };
    let (dense, _) = train_cae(&images, &config(0.0, 8)).unwrap();
    let (sparse, _) = train_cae(&images, &config(10.0, 8)).unwrap();
    assert!(mean_ratio(&sparse) < mean_ratio(&dense));
}

#[test]
fn models_survive_save_and_load() {
    let (images, _) = crops(8);
    let (model, _) = train_cae(&images, &config(1.0, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (enc, dec) = (dir.path().join("e.idsm"), dir.path().join("d.idsm"));
    model.save(&enc, &dec).unwrap();
    let back = CaeModel::load(small_arch(), 1.0, 1.0, &enc, &dec).unwrap();
    assert_eq!(back.encode(&images[0]).unwrap(), model.encode(&images[0]).unwrap());
    assert!(CaeModel::load(small_arch(), 1.0, 1.0, &dec, &enc).is_err());
}

fn inference_arch() -> InferenceArch {
    InferenceArch {
        conv1_filters: 4,
        conv2_filters: 8,
        hidden: 32,
        ..InferenceArch::standard(8)
    }
}

fn inference_config(epochs: usize) -> InferenceTrainConfig {
    InferenceTrainConfig {
        arch: inference_arch(),
        epochs,
        lr: 2e-4,
        batch_size: 8,
        seed: 1,
        ..InferenceTrainConfig::default()
    }
}

fn trained_inference() -> (InferenceModel, Vec<InteractionImage>, Vec<InteractionImage>, Vec<f64>) {
    let (images, objects) = crops(200);
    let (cae, _) = train_cae(&images[..60], &config(1.0, 3)).unwrap();
    let pairs: Vec<(InteractionImage, Descriptor)> =
        objects.iter().cloned().zip(cae.encode_images(&images).unwrap()).collect();
    let negatives = make_negative_images(9, 100).unwrap();
    let (model, report) = train_inference(&pairs, &negatives, &inference_config(10)).unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.loss).collect();
    (model, objects, negatives, losses)
}

#[test]
fn inference_training_learns() {
    let (model, objects, negatives, losses) = trained_inference();
    assert!(losses[losses.len() - 1] <= 0.7 * losses[0], "losses {losses:?}");
    let mean_norm = |v: &[InteractionImage]| {
        v.iter().map(|o| infer_descriptor(&model, o).unwrap().norm()).sum::<f64>() / v.len() as f64
    };
    assert!(mean_norm(&negatives) < mean_norm(&objects));

    let pos: Vec<f64> = objects.iter().map(|o| infer_descriptor(&model, o).unwrap().norm()).collect();
    let neg: Vec<f64> = negatives.iter().map(|o| infer_descriptor(&model, o).unwrap().norm()).collect();
    let dens = NormDensityPair::from_norms(&pos, &neg).unwrap();
    for (i, &x) in dens.grid.iter().enumerate() {
        assert!((dens.g.values[i] - naive_kde(&pos, dens.g.bandwidth, x)).abs() <= 1e-10);
        assert!((dens.h.values[i] - naive_kde(&neg, dens.h.bandwidth, x)).abs() <= 1e-10);
    }

    let img = &objects[0];
    let single = rotation_sweep_infer(&model, &dens, img, 1).unwrap();
    assert_eq!(single.descriptor, infer_descriptor(&model, img).unwrap());
    let swept = rotation_sweep_infer(&model, &dens, img, 16).unwrap();
    assert!(swept.likelihood >= single.likelihood);

    let scene = generate_scene(2, 5).unwrap().without_hand();
    let map = likelihood_map(&model, &dens, &scene, 4).unwrap();
    let (rows, cols, _) = window_grid(scene.width, scene.height, 4).unwrap();
    assert_eq!((map.rows, map.cols), ((scene.height - 32) / 4 + 1, (scene.width - 32) / 4 + 1));
    assert_eq!((map.rows, map.cols), (rows, cols));
    assert!(map.values.iter().all(|f| (0.0..=1.0).contains(f)));
}

fn naive_kde(samples: &[f64], bw: f64, x: f64) -> f64 {
    let mut total = 0.0;
    for s in samples {
        let u = (x - s) / bw;
        total += (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    }
    total / (samples.len() as f64 * bw)
}

#[test]
fn kde_agrees_with_kernel_sum() {
    let samples = [0.3, 1.7, 2.2, 5.0];
    for x in [-1.0, 0.0, 1.0, 2.5, 9.0] {
        assert!((kde_at(&samples, 0.7, x) - naive_kde(&samples, 0.7, x)).abs() <= 1e-12);
    }
}

#[test]
fn ratio_extremes() {
    assert!((sparsity_ratio(&[3.0f64, 4.0]) - 1.96).abs() < 1e-12);
    assert!((sparsity_ratio(&[0.0f64, -2.0, 0.0]) - 1.0).abs() < 1e-12);
}
