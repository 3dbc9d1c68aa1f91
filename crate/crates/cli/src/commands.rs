//! Command implementations. Every command reads and writes under `--out`
//! and refreshes the manifest when it finishes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use idspace::cae::{CaeArch, CaeModel};
use idspace::checkpoint::Checkpoint;
use idspace::data::{decode_pgm, encode_ppm, load_dataset, InteractionImage, IMAGE_SIZE, PLANE};
use idspace::inference::{
    infer_descriptor, rotation_sweep_infer, InferenceArch, InferenceModel, PSNR_CSV_HEADER,
};
use idspace::sweep::{evaluate_descriptor_space, lambda_sweep};

use crate::config::ExperimentConfig;
use crate::eval::{cup_audit, descriptor_dump, grip_blade_audit, norm_separation, psnr_train_test};
use crate::manifest::{sha256_hex, write_manifest};
use crate::pipeline::{densities, generate as generate_data, train_cae_stage, train_inference_stage, ExperimentData, DATA_FILES};
use crate::{Common, InferArgs};

pub const CONFIG_FILE: &str = "config.toml";
/// Training pairs used for the train-side PSNR.
pub const PSNR_PAIRS: usize = 400;
/// Held-out descriptors per evaluation set.
pub const EVAL_DESCRIPTORS: usize = 800;
/// Held-out positives and negatives in the norm separation test.
pub const SEPARATION_SAMPLES: usize = 200;
pub const CUP_SCENES: usize = 10;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }
    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn maps(&self) -> PathBuf {
        self.root.join("maps")
    }
    pub fn encoder(&self) -> PathBuf {
        self.models().join("encoder.idsm")
    }
    pub fn decoder(&self) -> PathBuf {
        self.models().join("decoder.idsm")
    }
    pub fn inference(&self) -> PathBuf {
        self.models().join("inference.idsm")
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Config file, then `<out>/config.toml`, then the profile, with command
/// line overrides applied last.
pub fn resolve_config(c: &Common) -> Result<ExperimentConfig> {
    let saved = c.out.join(CONFIG_FILE);
    let mut cfg = match (&c.config, c.profile) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(p)) => ExperimentConfig::profile(p),
        (None, None) if saved.exists() => ExperimentConfig::load(&saved)?,
        (None, None) => ExperimentConfig::paper(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.scenes {
        cfg.scenes = v;
    }
    if let Some(v) = c.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = &c.lambdas {
        cfg.lambdas = v.clone();
    }
    if let Some(v) = c.cae_epochs {
        cfg.cae_epochs = v;
    }
    if let Some(v) = c.inference_epochs {
        cfg.inference_epochs = v;
    }
    if let Some(v) = c.descriptor_dim {
        cfg.descriptor_dim = v;
    }
    if let Some(v) = c.bandwidth {
        cfg.bandwidth = Some(v);
    }
    if let Some(v) = c.stride {
        cfg.stride = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_set(layout: &Layout, name: &str) -> Result<Vec<InteractionImage>> {
    let path = layout.data().join(name);
    if !path.exists() {
        return Err(idspace::Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing dataset {} (run `generate` first)", path.display()),
        ))
        .into());
    }
    Ok(load_dataset(&path).with_context(|| format!("reading {}", path.display()))?.items)
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if !path.exists() {
        return Err(idspace::Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing {} (run `{producer}` first)", path.display()),
        ))
        .into());
    }
    Ok(())
}

pub fn load_cae(cfg: &ExperimentConfig, layout: &Layout) -> Result<CaeModel> {
    require(&layout.encoder(), "train-cae")?;
    require(&layout.decoder(), "train-cae")?;
    Ok(CaeModel::load(
        CaeArch::standard(cfg.descriptor_dim),
        cfg.beta,
        cfg.lambda,
        &layout.encoder(),
        &layout.decoder(),
    )?)
}

pub fn load_inference(cfg: &ExperimentConfig, layout: &Layout) -> Result<InferenceModel> {
    require(&layout.inference(), "train-inference")?;
    let model = InferenceModel::load(InferenceArch::standard(cfg.descriptor_dim), &layout.inference());
    match model {
        Err(idspace::Error::Config(_)) => Err(idspace::Error::Config(format!(
            "inference model in {} does not produce {}-dimensional descriptors",
            layout.inference().display(),
            cfg.descriptor_dim
        ))
        .into()),
        other => Ok(other?),
    }
}

fn keep_checkpoint(err: &idspace::Error, layout: &Layout) -> Result<()> {
    if let idspace::Error::NumericalAbort {
        checkpoint: Some(cp), ..
    } = err
    {
        match cp.as_ref() {
            Checkpoint::Cae(m) => m.save(
                &layout.models().join("checkpoint_encoder.idsm"),
                &layout.models().join("checkpoint_decoder.idsm"),
            )?,
            Checkpoint::Inference(m) => m.save(&layout.models().join("checkpoint_inference.idsm"))?,
        }
    }
    Ok(())
}

fn finish(layout: &Layout) -> Result<()> {
    write_manifest(&layout.root)
}

pub fn generate(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let layout = Layout::new(&c.out);
    let data = generate_data(&cfg)?;
    let written = data.save(&layout.data())?;
    write(&c.out.join(CONFIG_FILE), cfg.to_toml())?;
    let mut gen = format!("seed = {}\nscenes = {}\ntest_scenes = {}\n", cfg.seed, cfg.scenes, cfg.test_scenes);
    for (name, path) in DATA_FILES.iter().zip(&written) {
        let bytes = fs::read(path)?;
        let count = load_dataset(path)?.len();
        let key = name.trim_end_matches(".iids");
        gen.push_str(&format!("{key}_count = {count}\n{key}_sha256 = \"{}\"\n", sha256_hex(&bytes)));
    }
    write(&layout.data().join("generation.toml"), gen)?;
    eprintln!("generated {} training crops into {}", data.train.len(), layout.data().display());
    finish(&layout)
}

pub fn train_cae(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let layout = Layout::new(&c.out);
    let train = load_set(&layout, DATA_FILES[0])?;
    fs::create_dir_all(layout.models())?;
    let outcome = train_cae_stage(&cfg, cfg.lambda, &train, |e| {
        eprintln!("epoch {:>3}  C_err {:.4}  C_sparse {:.4}  C {:.4}", e.epoch, e.c_err, e.c_sparse, e.c)
    });
    let (model, report) = match outcome {
        Ok(v) => v,
        Err(e) => {
            if let Some(core) = e.downcast_ref::<idspace::Error>() {
                keep_checkpoint(core, &layout)?;
                finish(&layout)?;
            }
            return Err(e);
        }
    };
    model.save(&layout.encoder(), &layout.decoder())?;
    write(&layout.reports().join("cae_train.csv"), report.to_csv())?;
    finish(&layout)
}

pub fn train_inference(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let layout = Layout::new(&c.out);
    let cae = load_cae(&cfg, &layout)?;
    let data = ExperimentData::load(&layout.data())?;
    let outcome = train_inference_stage(&cfg, &cae, &data, |e| eprintln!("epoch {:>3}  loss {:.4}", e.epoch, e.loss));
    let (model, report) = match outcome {
        Ok(v) => v,
        Err(e) => {
            if let Some(core) = e.downcast_ref::<idspace::Error>() {
                keep_checkpoint(core, &layout)?;
                finish(&layout)?;
            }
            return Err(e);
        }
    };
    model.save(&layout.inference())?;
    write(&layout.reports().join("inference_train.csv"), report.to_csv())?;
    finish(&layout)
}

pub fn eval(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let layout = Layout::new(&c.out);
    let cae = load_cae(&cfg, &layout)?;
    let model = load_inference(&cfg, &layout)?;
    let data = ExperimentData::load(&layout.data())?;
    let reports = layout.reports();

    let eval_set: Vec<InteractionImage> = data.test.items.iter().take(EVAL_DESCRIPTORS).cloned().collect();
    let (m, _, _) = evaluate_descriptor_space(&cae, &eval_set, &cfg.mean_shift())?;
    write(
        &reports.join("purity.csv"),
        format!(
            "lambda,seed,n,bandwidth,clusters,purity_macro,purity_micro,mu_dia,c_err,c_sparse\n{},{},{},{},{},{},{},{},{},{}\n",
            cfg.lambda,
            cfg.seed,
            eval_set.len(),
            m.bandwidth,
            m.clusters,
            m.purity_macro,
            m.purity_micro,
            m.mu_dia,
            m.c_err,
            m.c_sparse
        ),
    )?;
    write(&reports.join("descriptors_2d.csv"), descriptor_dump(&cae, &eval_set)?)?;

    let held_out = data.held_out(cfg.test_crops_per_scene);
    let dens = densities(&model, &held_out)?;
    write(&reports.join("norm_density.csv"), dens.to_csv())?;
    let take = |v: &[InteractionImage]| v.iter().take(SEPARATION_SAMPLES).cloned().collect::<Vec<_>>();
    let sep = norm_separation(&model, &dens, &take(&held_out.eval_positives), &take(&held_out.eval_negatives))?;
    write(
        &reports.join("likelihood.csv"),
        format!(
            "n_positive,n_negative,u,z,p_two_sided,p_greater,mean_f_positive,mean_f_negative\n{},{},{},{},{},{},{},{}\n",
            sep.positive_norms.len(),
            sep.negative_norms.len(),
            sep.test.u,
            sep.test.z,
            sep.test.p_two_sided,
            sep.test.p_greater,
            sep.mean_f_positive,
            sep.mean_f_negative
        ),
    )?;

    let (train_psnr, test_psnr) = psnr_train_test(&cae, &model, &data, &held_out, PSNR_PAIRS)?;
    write(
        &reports.join("psnr.csv"),
        format!("{PSNR_CSV_HEADER}{}{}", train_psnr.csv_rows("train"), test_psnr.csv_rows("test")),
    )?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut audit = String::from("scene,prototype,grip_fraction,blade_fraction,grip_wins\n");
    for (i, a) in grip_blade_audit(&cfg, &model, &dens)?.iter().enumerate() {
        write(&layout.maps().join(format!("likelihood_{i:02}.pgm")), a.map.to_pgm())?;
        write(&layout.maps().join(format!("likelihood_{i:02}.csv")), a.map.to_csv())?;
        audit.push_str(&format!(
            "{i},{},{},{},{}\n",
            a.scene.prototype,
            opt(a.grip_fraction),
            opt(a.blade_fraction),
            a.grip_wins()
        ));
    }
    write(&reports.join("grip_blade.csv"), audit)?;

    let mut cups = String::from("scene,clusters,handle_cluster,bottom_cluster,separated\n");
    for (i, a) in cup_audit(&cfg, &model, CUP_SCENES)?.iter().enumerate() {
        write(&layout.maps().join(format!("clusters_{i:02}.pgm")), a.clusters.to_pgm())?;
        write(&layout.maps().join(format!("clusters_{i:02}.csv")), a.clusters.to_csv())?;
        let id = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        cups.push_str(&format!(
            "{i},{},{},{},{}\n",
            a.clusters.assignment.cluster_count(),
            id(a.handle_cluster),
            id(a.bottom_cluster),
            a.separated()
        ));
    }
    write(&reports.join("cup_clusters.csv"), cups)?;
    finish(&layout)
}

pub fn sweep_lambda(c: &Common) -> Result<()> {
    let cfg = resolve_config(c)?;
    let layout = Layout::new(&c.out);
    let train = load_set(&layout, DATA_FILES[0])?;
    let test: Vec<InteractionImage> = load_set(&layout, DATA_FILES[2])?.into_iter().take(EVAL_DESCRIPTORS).collect();
    let report = lambda_sweep(&train, &test, &cfg.lambdas, &cfg.cae_config(cfg.lambda), &cfg.mean_shift())?;
    for r in &report.runs {
        eprintln!("{}", r.csv_row());
    }
    write(&layout.reports().join("sweep.csv"), report.to_csv())?;
    write(&layout.reports().join("sweep.svg"), report.to_svg())?;
    finish(&layout)
}

fn infer_input(a: &InferArgs) -> Result<InteractionImage> {
    if let Some(path) = &a.image {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let (plane, w, h) = decode_pgm(&bytes)?;
        if (w, h) != (IMAGE_SIZE, IMAGE_SIZE) {
            bail!(idspace::Error::Config(format!("object image must be {IMAGE_SIZE}x{IMAGE_SIZE}, got {w}x{h}")));
        }
        let mask: Vec<f32> = plane.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        return Ok(InteractionImage::new(&plane, &[0.0; PLANE], &mask)?);
    }
    match (&a.dataset, a.index) {
        (Some(path), Some(i)) => {
            let set = load_dataset(path).with_context(|| format!("reading {}", path.display()))?;
            let len = set.len();
            set.items
                .into_iter()
                .nth(i)
                .ok_or_else(|| idspace::Error::Config(format!("index {i} outside dataset of {len} items")).into())
        }
        _ => bail!(idspace::Error::Usage("pass --image or --dataset with --index".into())),
    }
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let layout = Layout::new(&a.common.out);
    let cae = load_cae(&cfg, &layout)?;
    let model = load_inference(&cfg, &layout)?;
    let data = ExperimentData::load(&layout.data())?;
    let dens = densities(&model, &data.held_out(cfg.test_crops_per_scene))?;
    let input = infer_input(a)?;
    let (descriptor, angle, f) = if a.rotate {
        let r = rotation_sweep_infer(&model, &dens, &input, cfg.n_angles)?;
        (r.descriptor, r.angle, r.likelihood)
    } else {
        let d = infer_descriptor(&model, &input)?;
        let f = dens.likelihood_of_norm(d.norm());
        (d, 0.0, f)
    };
    let decoded = cae.decode(&descriptor)?;
    let dir = layout.root.join("infer");
    let values: Vec<String> = descriptor.values.iter().map(|v| v.to_string()).collect();
    write(&dir.join("descriptor.csv"), format!("{}\n", values.join(",")))?;
    write(&dir.join("decoded.ppm"), encode_ppm(&decoded))?;
    write(&dir.join("result.csv"), format!("likelihood,angle_rad,norm\n{f},{angle},{}\n", descriptor.norm()))?;
    println!("f = {f:.4}  angle = {angle:.4} rad  |R(O)| = {:.4}", descriptor.norm());
    finish(&layout)
}
