//! Evaluations built on R: composed inference, likelihood maps, rotation
//! sweeps, PSNR and position-descriptor clustering.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::density::NormDensityPair;
use super::model::InferenceModel;
use crate::cae::{CaeModel, Descriptor};
use crate::data::{normalize_pose, Channel, InteractionImage, Scene, IMAGE_SIZE};
use crate::error::{config_err, Result};
use crate::metrics::{mean_shift, median_pairwise_distance, ClusterAssignment, MeanShiftConfig};

pub const LIKELIHOOD_THRESHOLD: f64 = 0.9;
pub const DEFAULT_ANGLES: usize = 16;
pub const PSNR_CAP_DB: f64 = 99.0;

fn check_dims(cae: &CaeModel, model: &InferenceModel) -> Result<()> {
    if cae.descriptor_dim() != model.descriptor_dim() {
        return config_err(format!(
            "CAE descriptor dimension {} does not match inference model dimension {}",
            cae.descriptor_dim(),
            model.descriptor_dim()
        ));
    }
    Ok(())
}

/// `D(R(O))`: the interaction image the decoder draws for an object.
pub fn infer_interaction_image(
    cae: &CaeModel,
    model: &InferenceModel,
    object_image: &InteractionImage,
) -> Result<InteractionImage> {
    Ok(infer_interaction_images(cae, model, std::slice::from_ref(object_image))?.remove(0))
}

pub fn infer_interaction_images(
    cae: &CaeModel,
    model: &InferenceModel,
    object_images: &[InteractionImage],
) -> Result<Vec<InteractionImage>> {
    check_dims(cae, model)?;
    let descriptors = model.infer_batch(object_images)?;
    descriptors.iter().map(|d| cae.decode(d)).collect()
}

/// Top-left corners of every 32x32 window at `stride`, row-major, with the
/// grid shape `(rows, cols)`.
pub fn window_grid(width: usize, height: usize, stride: usize) -> Result<(usize, usize, Vec<(usize, usize)>)> {
    if stride == 0 {
        return config_err("window stride must be positive");
    }
    if width < IMAGE_SIZE || height < IMAGE_SIZE {
        return config_err(format!("scene {width}x{height} is smaller than a window"));
    }
    let rows = (height - IMAGE_SIZE) / stride + 1;
    let cols = (width - IMAGE_SIZE) / stride + 1;
    let corners = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c * stride, r * stride)))
        .collect();
    Ok((rows, cols, corners))
}

/// Pixel coordinates of a window's center.
pub fn window_center(x0: usize, y0: usize) -> (usize, usize) {
    (x0 + IMAGE_SIZE / 2, y0 + IMAGE_SIZE / 2)
}

fn object_windows(scene: &Scene, corners: &[(usize, usize)]) -> Result<Vec<InteractionImage>> {
    corners.iter().map(|&(x, y)| scene.object_window(x, y)).collect()
}

/// `f` per window center over a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodMap {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    pub window: usize,
    /// Row-major window centers in scene pixels.
    pub centers: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl LikelihoodMap {
    pub fn above(&self, threshold: f64) -> Vec<bool> {
        self.values.iter().map(|&f| f > threshold).collect()
    }

    /// Fraction of the given centers with `f` above `threshold`, or `None`
    /// when no center satisfies `select`.
    pub fn fraction_above(&self, threshold: f64, select: impl Fn(usize, usize) -> bool) -> Option<f64> {
        let (mut hit, mut n) = (0usize, 0usize);
        for (&(x, y), &f) in self.centers.iter().zip(&self.values) {
            if select(x, y) {
                n += 1;
                hit += (f > threshold) as usize;
            }
        }
        (n > 0).then(|| hit as f64 / n as f64)
    }

    /// `cols x rows` binary PGM, `f` scaled to 0..255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.values.iter().map(|f| (f.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cx,cy,f\n");
        for (&(x, y), f) in self.centers.iter().zip(&self.values) {
            out.push_str(&format!("{x},{y},{f}\n"));
        }
        out
    }
}

/// Slides a window over the hand-free scene and records `f` at each center.
pub fn likelihood_map(
    model: &InferenceModel,
    densities: &NormDensityPair,
    scene: &Scene,
    stride: usize,
) -> Result<LikelihoodMap> {
    let (rows, cols, corners) = window_grid(scene.width, scene.height, stride)?;
    let descriptors = model.infer_batch(&object_windows(scene, &corners)?)?;
    Ok(LikelihoodMap {
        rows,
        cols,
        stride,
        window: IMAGE_SIZE,
        centers: corners.iter().map(|&(x, y)| window_center(x, y)).collect(),
        values: descriptors.iter().map(|d| densities.likelihood_of_norm(d.norm())).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotationResult {
    /// Radians in `[0, 2pi)`.
    pub angle: f64,
    pub descriptor: Descriptor,
    pub likelihood: f64,
}

/// Evaluates R on the image rotated by `k * 2pi / n_angles` and keeps the
/// rotation with the largest `f`. Ties go to the smallest angle.
pub fn rotation_sweep_infer(
    model: &InferenceModel,
    densities: &NormDensityPair,
    object_image: &InteractionImage,
    n_angles: usize,
) -> Result<RotationResult> {
    if n_angles == 0 {
        return config_err("rotation sweep needs at least one angle");
    }
    let angles: Vec<f64> = (0..n_angles).map(|k| k as f64 * TAU / n_angles as f64).collect();
    let rotated: Vec<InteractionImage> = angles
        .iter()
        .map(|&a| if a == 0.0 { object_image.clone() } else { normalize_pose(object_image, a as f32, (0.0, 0.0)) })
        .collect();
    let descriptors = model.infer_batch(&rotated)?;
    let mut best: Option<RotationResult> = None;
    for (angle, d) in angles.into_iter().zip(descriptors) {
        let f = densities.likelihood_of_norm(d.norm());
        if best.as_ref().map_or(true, |b| f > b.likelihood) {
            best = Some(RotationResult {
                angle,
                descriptor: d,
                likelihood: f,
            });
        }
    }
    Ok(best.expect("at least one angle"))
}

/// PSNR of one channel with peak value 1, capped at [`PSNR_CAP_DB`].
/// Returns the value and whether the cap applied.
pub fn channel_psnr(reference: &[f32], estimate: &[f32]) -> (f64, bool) {
    let mse = reference
        .iter()
        .zip(estimate)
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return (PSNR_CAP_DB, true);
    }
    let db = 10.0 * (1.0 / mse).log10();
    if db >= PSNR_CAP_DB {
        (PSNR_CAP_DB, true)
    } else {
        (db, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPsnr {
    pub mean_db: f64,
    pub n: usize,
    pub capped: usize,
}

/// Mean PSNR per channel in [`Channel::ALL`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsnrReport {
    pub channels: [ChannelPsnr; 3],
}

impl PsnrReport {
    /// Mean PSNR between ground-truth images and estimates.
    pub fn between(truth: &[InteractionImage], estimates: &[InteractionImage]) -> Result<Self> {
        if truth.is_empty() || truth.len() != estimates.len() {
            return config_err(format!(
                "PSNR needs equal nonempty sets, got {} and {}",
                truth.len(),
                estimates.len()
            ));
        }
        let mut channels = [ChannelPsnr { mean_db: 0.0, n: truth.len(), capped: 0 }; 3];
        for (t, e) in truth.iter().zip(estimates) {
            for (slot, ch) in channels.iter_mut().zip(Channel::ALL) {
                let (db, capped) = channel_psnr(t.channel(ch), e.channel(ch));
                slot.mean_db += db;
                slot.capped += capped as usize;
            }
        }
        for c in &mut channels {
            c.mean_db /= truth.len() as f64;
        }
        Ok(Self { channels })
    }

    pub fn csv_rows(&self, split: &str) -> String {
        Channel::ALL
            .iter()
            .zip(&self.channels)
            .map(|(ch, c)| format!("{split},{},{},{},{}\n", ch.name(), c.mean_db, c.n, c.capped))
            .collect()
    }
}

pub const PSNR_CSV_HEADER: &str = "split,channel,mean_psnr_db,n,capped_count\n";

/// PSNR between ground-truth interaction images and `D(R(O))` for their
/// object-only counterparts.
pub fn psnr_eval(
    cae: &CaeModel,
    model: &InferenceModel,
    pairs: &[(InteractionImage, InteractionImage)],
) -> Result<PsnrReport> {
    let objects: Vec<InteractionImage> = pairs.iter().map(|(o, _)| o.clone()).collect();
    let truth: Vec<InteractionImage> = pairs.iter().map(|(_, t)| t.clone()).collect();
    PsnrReport::between(&truth, &infer_interaction_images(cae, model, &objects)?)
}

/// Mean-shift cluster ids per window center.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMap {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    pub centers: Vec<(usize, usize)>,
    pub position_weight: f64,
    pub assignment: ClusterAssignment,
}

impl ClusterMap {
    pub fn id_at(&self, x: usize, y: usize) -> Option<usize> {
        self.centers.iter().position(|&c| c == (x, y)).map(|i| self.assignment.ids[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cx,cy,cluster_id\n");
        for (&(x, y), id) in self.centers.iter().zip(&self.assignment.ids) {
            out.push_str(&format!("{x},{y},{id}\n"));
        }
        out
    }

    /// `cols x rows` PGM with cluster ids spread over the gray range.
    pub fn to_pgm(&self) -> Vec<u8> {
        let k = self.assignment.cluster_count().max(2) - 1;
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.assignment.ids.iter().map(|&id| (id * 255 / k) as u8));
        out
    }
}

/// Weight that equalizes the median pairwise distances of positions and
/// descriptors; 1 when either spread is zero.
pub fn balanced_position_weight(descriptors: &[Descriptor], positions: &[(usize, usize)]) -> f64 {
    let pos: Vec<Vec<f64>> = positions.iter().map(|&(x, y)| vec![x as f64, y as f64]).collect();
    match (median_pairwise_distance(descriptors), median_pairwise_distance(&pos)) {
        (Some(md), Some(mp)) if md > 0.0 && mp > 0.0 => md / mp,
        _ => 1.0,
    }
}

/// Clusters `[R(O) ; w * (x, y)]` over all windows of a hand-free scene.
/// `position_weight = None` picks [`balanced_position_weight`].
pub fn position_descriptor_cluster(
    model: &InferenceModel,
    scene: &Scene,
    stride: usize,
    position_weight: Option<f64>,
    mean_shift_config: &MeanShiftConfig,
) -> Result<ClusterMap> {
    let (rows, cols, corners) = window_grid(scene.width, scene.height, stride)?;
    let centers: Vec<(usize, usize)> = corners.iter().map(|&(x, y)| window_center(x, y)).collect();
    let descriptors = model.infer_batch(&object_windows(scene, &corners)?)?;
    let w = match position_weight {
        Some(w) if w >= 0.0 && w.is_finite() => w,
        Some(w) => return config_err(format!("position weight must be finite and nonnegative, got {w}")),
        None => balanced_position_weight(&descriptors, &centers),
    };
    let points: Vec<Vec<f64>> = descriptors
        .iter()
        .zip(&centers)
        .map(|(d, &(x, y))| {
            let mut v = d.values.clone();
            v.extend([w * x as f64, w * y as f64]);
            v
        })
        .collect();
    Ok(ClusterMap {
        rows,
        cols,
        stride,
        centers,
        position_weight: w,
        assignment: mean_shift(&points, mean_shift_config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PLANE;

    fn uniform(v: f32) -> InteractionImage {
        InteractionImage::new(&[v; PLANE], &[v; PLANE], &[v; PLANE]).unwrap()
    }

    #[test]
    fn psnr_hand_cases() {
        let a = uniform(0.5);
        assert_eq!(channel_psnr(a.appearance(), a.appearance()), (99.0, true));
        let (db, capped) = channel_psnr(&[0.5; PLANE], &[0.6; PLANE]);
        assert!((db - 20.0).abs() < 1e-5 && !capped);
        let r = PsnrReport::between(&[a.clone()], &[a]).unwrap();
        assert!(r.channels.iter().all(|c| c.mean_db == 99.0 && c.capped == 1));
        assert!(r.csv_rows("train").starts_with("train,appearance,99,1,1\n"));
    }

    #[test]
    fn grid_geometry() {
        let (rows, cols, corners) = window_grid(64, 48, 4).unwrap();
        assert_eq!((rows, cols), (5, 9));
        assert_eq!(corners.len(), 45);
        assert_eq!(corners[9], (0, 4));
        assert!(window_grid(64, 64, 0).is_err());
        assert!(window_grid(31, 64, 1).is_err());
    }
}
