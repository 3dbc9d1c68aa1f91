//! Evaluation stages: purity, likelihood separation, maps, PSNR and
//! descriptor dumps.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use idspace::cae::CaeModel;
use idspace::data::{InteractionImage, Region, Scene};
use idspace::inference::{
    inferred_norms, likelihood_map, position_descriptor_cluster, psnr_eval, ClusterMap, InferenceModel, LikelihoodMap,
    NormDensityPair, PsnrReport, LIKELIHOOD_THRESHOLD,
};
use idspace::metrics::{mann_whitney, MannWhitney};

use crate::config::ExperimentConfig;
use crate::pipeline::{map_scenes, ExperimentData, HeldOut, CUP_PROTOTYPE, GRIP_TOOL_PROTOTYPES};

/// Norms and likelihoods of held-out positives against negatives.
#[derive(Clone, Debug)]
pub struct NormSeparation {
    pub positive_norms: Vec<f64>,
    pub negative_norms: Vec<f64>,
    pub test: MannWhitney,
    pub mean_f_positive: f64,
    pub mean_f_negative: f64,
}

pub fn norm_separation(
    model: &InferenceModel,
    densities: &NormDensityPair,
    positives: &[InteractionImage],
    negatives: &[InteractionImage],
) -> Result<NormSeparation> {
    let positive_norms = inferred_norms(model, positives)?;
    let negative_norms = inferred_norms(model, negatives)?;
    let mean_f = |norms: &[f64]| norms.iter().map(|&n| densities.likelihood_of_norm(n)).sum::<f64>() / norms.len() as f64;
    Ok(NormSeparation {
        test: mann_whitney(&positive_norms, &negative_norms)?,
        mean_f_positive: mean_f(&positive_norms),
        mean_f_negative: mean_f(&negative_norms),
        positive_norms,
        negative_norms,
    })
}

fn inside(region: Option<&Region>) -> impl Fn(usize, usize) -> bool + '_ {
    move |x, y| region.is_some_and(|r| r.contains(x, y))
}

/// Likelihood map of one grip-tool scene with the `f > 0.9` fractions of
/// centers inside the grip and blade boxes.
#[derive(Clone, Debug)]
pub struct GripBladeAudit {
    pub scene: Scene,
    pub map: LikelihoodMap,
    pub grip_fraction: Option<f64>,
    pub blade_fraction: Option<f64>,
}

impl GripBladeAudit {
    pub fn grip_wins(&self) -> bool {
        matches!((self.grip_fraction, self.blade_fraction), (Some(g), Some(b)) if g > b)
    }
}

pub fn grip_blade_audit(
    config: &ExperimentConfig,
    model: &InferenceModel,
    densities: &NormDensityPair,
) -> Result<Vec<GripBladeAudit>> {
    map_scenes(config, &GRIP_TOOL_PROTOTYPES, config.map_scenes)?
        .into_iter()
        .map(|scene| {
            let map = likelihood_map(model, densities, &scene, config.stride)?;
            Ok(GripBladeAudit {
                grip_fraction: map.fraction_above(LIKELIHOOD_THRESHOLD, inside(scene.region("grip"))),
                blade_fraction: map.fraction_above(LIKELIHOOD_THRESHOLD, inside(scene.region("blade"))),
                map,
                scene,
            })
        })
        .collect()
}

/// Cluster map of one cup scene with the majority cluster of the window
/// centers inside the handle and bottom boxes.
#[derive(Clone, Debug)]
pub struct CupAudit {
    pub scene: Scene,
    pub clusters: ClusterMap,
    pub handle_cluster: Option<usize>,
    pub bottom_cluster: Option<usize>,
}

impl CupAudit {
    pub fn separated(&self) -> bool {
        matches!((self.handle_cluster, self.bottom_cluster), (Some(h), Some(b)) if h != b)
    }
}

fn majority_cluster(map: &ClusterMap, select: impl Fn(usize, usize) -> bool) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(x, y), &id) in map.centers.iter().zip(&map.assignment.ids) {
        if select(x, y) {
            *counts.entry(id).or_default() += 1;
        }
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(id, _)| id)
}

pub fn cup_audit(config: &ExperimentConfig, model: &InferenceModel, count: usize) -> Result<Vec<CupAudit>> {
    map_scenes(config, &[CUP_PROTOTYPE], count)?
        .into_iter()
        .map(|scene| {
            let clusters =
                position_descriptor_cluster(model, &scene, config.stride, config.position_weight, &config.mean_shift())?;
            Ok(CupAudit {
                handle_cluster: majority_cluster(&clusters, inside(scene.region("handle"))),
                bottom_cluster: majority_cluster(&clusters, inside(scene.region("bottom"))),
                clusters,
                scene,
            })
        })
        .collect()
}

/// PSNR of `D(R(O))` on up to `n` training pairs and on the held-out
/// evaluation pairs.
pub fn psnr_train_test(
    cae: &CaeModel,
    model: &InferenceModel,
    data: &ExperimentData,
    held_out: &HeldOut,
    n: usize,
) -> Result<(PsnrReport, PsnrReport)> {
    let pairs = |objects: &[InteractionImage], truth: &[InteractionImage]| -> Vec<(InteractionImage, InteractionImage)> {
        objects.iter().cloned().zip(truth.iter().cloned()).take(n).collect()
    };
    let train = psnr_eval(cae, model, &pairs(&data.train_objects.items, &data.train.items)).context("train PSNR")?;
    let test = psnr_eval(cae, model, &pairs(&held_out.eval_positives, &held_out.eval_truth)).context("test PSNR")?;
    Ok((train, test))
}

/// Two descriptor dimensions with the largest variance over the test set,
/// dumped with labels as `dim_a,dim_b,label` rows.
pub fn descriptor_dump(cae: &CaeModel, test: &[InteractionImage]) -> Result<String> {
    let descriptors = cae.encode_images(test)?;
    let d = cae.descriptor_dim();
    let n = descriptors.len().max(1) as f64;
    let mut var: Vec<(usize, f64)> = (0..d)
        .map(|k| {
            let mean = descriptors.iter().map(|x| x.values[k]).sum::<f64>() / n;
            (k, descriptors.iter().map(|x| (x.values[k] - mean).powi(2)).sum::<f64>() / n)
        })
        .collect();
    var.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (a, b) = (var[0].0, var.get(1).map_or(var[0].0, |v| v.0));
    let mut out = format!("dim_{a},dim_{b},label\n");
    for (x, img) in descriptors.iter().zip(test) {
        out.push_str(&format!(
            "{},{},{}\n",
            x.values[a],
            x.values[b],
            img.label.map_or(-1, i32::from)
        ));
    }
    Ok(out)
}
