//! Deterministic synthetic scene rendering and window extraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::{InteractionImage, Pose, IMAGE_SIZE, PLANE};
use super::prototypes::{prototype, Prototype, PROTOTYPE_COUNT};
use crate::error::{config_err, Error, Result};

pub const DEFAULT_SCENE_SIZE: usize = 64;
/// Consecutive rejected windows before crop sampling gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

/// Mixes a base seed with a stream index into an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample similarity jitter applied to a prototype.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenePose {
    pub scale: f32,
    /// Radians.
    pub rotation: f32,
    pub tx: f32,
    pub ty: f32,
}

/// Inclusive pixel bounding box of a named object part.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub name: String,
    pub avoided: bool,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) as f64 / 2.0, (self.y0 + self.y1) as f64 / 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_SCENE_SIZE,
            height: DEFAULT_SCENE_SIZE,
        }
    }
}

/// A rendered hand-object scene with exact masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    /// Grayscale appearance with the hand drawn over the object.
    pub appearance: Vec<f32>,
    /// The same scene rendered without the hand.
    pub object_only: Vec<f32>,
    /// Binary hand mask.
    pub hand_mask: Vec<f32>,
    /// Binary object mask (full object geometry, including occluded parts).
    pub object_mask: Vec<f32>,
    pub prototype: usize,
    pub pose: ScenePose,
    pub regions: Vec<Region>,
    pub seed: u64,
}

pub fn generate_scene(prototype_id: usize, seed: u64) -> Result<Scene> {
    generate_scene_with(&SceneConfig::default(), prototype_id, seed)
}

pub fn generate_scene_with(config: &SceneConfig, prototype_id: usize, seed: u64) -> Result<Scene> {
    let proto = prototype(prototype_id).ok_or_else(|| {
        Error::Config(format!(
            "prototype id {prototype_id} outside 0..{PROTOTYPE_COUNT}"
        ))
    })?;
    if config.width < IMAGE_SIZE || config.height < IMAGE_SIZE {
        return config_err(format!(
            "scene must be at least {IMAGE_SIZE}x{IMAGE_SIZE}, got {}x{}",
            config.width, config.height
        ));
    }
    Ok(render(&proto, config, seed))
}

fn render(proto: &Prototype, config: &SceneConfig, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, proto.id as u64));
    let pose = ScenePose {
        scale: rng.gen_range(0.85f32..=1.15),
        rotation: rng.gen_range(-10.0f32..=10.0).to_radians(),
        tx: rng.gen_range(-2.0f32..=2.0),
        ty: rng.gen_range(-2.0f32..=2.0),
    };
    let bg = rng.gen_range(0.08f32..0.22);
    let (gx, gy) = (rng.gen_range(-0.002f32..0.002), rng.gen_range(-0.002f32..0.002));
    let obj_tone = rng.gen_range(0.40f32..0.60);
    let freq = rng.gen_range(0.15f32..0.35);
    let angle = rng.gen_range(0.0f32..std::f32::consts::PI);
    let phase = rng.gen_range(0.0f32..std::f32::consts::TAU);
    let amp = rng.gen_range(0.02f32..0.07);
    let hand_tone = rng.gen_range(0.82f32..0.94);

    let (w, h) = (config.width, config.height);
    let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
    let (sin, cos) = pose.rotation.sin_cos();
    let (dir_s, dir_c) = angle.sin_cos();

    let mut appearance = vec![0.0; w * h];
    let mut object_only = vec![0.0; w * h];
    let mut hand_mask = vec![0.0; w * h];
    let mut object_mask = vec![0.0; w * h];
    let mut part_boxes: Vec<Option<(usize, usize, usize, usize)>> = vec![None; proto.parts.len()];

    for y in 0..h {
        for x in 0..w {
            // inverse similarity: scene pixel center -> canonical frame
            let dx = x as f32 + 0.5 - cx - pose.tx;
            let dy = y as f32 + 0.5 - cy - pose.ty;
            let u = (cos * dx + sin * dy) / pose.scale;
            let v = (-sin * dx + cos * dy) / pose.scale;
            let in_hand = proto.hand.iter().any(|s| s.contains(u, v));
            let part = proto
                .parts
                .iter()
                .position(|p| p.shapes.iter().any(|s| s.contains(u, v)));
            let noise = rng.gen_range(-0.03f32..0.03);
            let i = y * w + x;
            let base = match part {
                Some(pi) => {
                    let b = &mut part_boxes[pi];
                    *b = Some(match *b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                    object_mask[i] = 1.0;
                    let stripe = (std::f32::consts::TAU * freq * (u * dir_c + v * dir_s) + phase).sin();
                    obj_tone + proto.parts[pi].tone + amp * stripe
                }
                None => bg + gx * (x as f32 - cx) + gy * (y as f32 - cy),
            };
            object_only[i] = (base + noise).clamp(0.0, 1.0);
            appearance[i] = if in_hand {
                hand_mask[i] = 1.0;
                (hand_tone + 0.5 * noise).clamp(0.0, 1.0)
            } else {
                object_only[i]
            };
        }
    }

    // parts sharing a name merge into one region
    let mut regions: Vec<Region> = Vec::new();
    for (p, bbox) in proto.parts.iter().zip(part_boxes) {
        let Some((x0, y0, x1, y1)) = bbox else { continue };
        match regions.iter_mut().find(|r| r.name == p.name) {
            Some(r) => {
                r.x0 = r.x0.min(x0);
                r.y0 = r.y0.min(y0);
                r.x1 = r.x1.max(x1);
                r.y1 = r.y1.max(y1);
            }
            None => regions.push(Region {
                name: p.name.to_string(),
                avoided: p.avoided,
                x0,
                y0,
                x1,
                y1,
            }),
        }
    }

    Scene {
        width: w,
        height: h,
        appearance,
        object_only,
        hand_mask,
        object_mask,
        prototype: proto.id,
        pose,
        regions,
        seed,
    }
}

fn window(plane: &[f32], width: usize, x0: usize, y0: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(PLANE);
    for y in y0..y0 + IMAGE_SIZE {
        out.extend_from_slice(&plane[y * width + x0..y * width + x0 + IMAGE_SIZE]);
    }
    out
}

/// A crop of a scene: the interaction image and the object-only image of
/// the same window.
#[derive(Clone, Debug, PartialEq)]
pub struct CropSample {
    pub interaction: InteractionImage,
    pub object: InteractionImage,
    pub x0: usize,
    pub y0: usize,
}

impl Scene {
    pub fn label(&self) -> u8 {
        self.prototype as u8
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }

    /// The scene as it looks with the hand removed.
    pub fn without_hand(&self) -> Scene {
        Scene {
            appearance: self.object_only.clone(),
            hand_mask: vec![0.0; self.hand_mask.len()],
            ..self.clone()
        }
    }

    pub fn hand_area(&self) -> usize {
        self.hand_mask.iter().filter(|&&v| v > 0.5).count()
    }

    fn check_window(&self, x0: usize, y0: usize) -> Result<()> {
        if x0 + IMAGE_SIZE > self.width || y0 + IMAGE_SIZE > self.height {
            return config_err(format!(
                "window at ({x0}, {y0}) exceeds {}x{} scene",
                self.width, self.height
            ));
        }
        Ok(())
    }

    fn crop_pose(&self, x0: usize, y0: usize) -> Pose {
        let half = IMAGE_SIZE as f32 / 2.0;
        Pose {
            rotation: self.pose.rotation,
            tx: x0 as f32 + half - self.width as f32 / 2.0,
            ty: y0 as f32 + half - self.height as f32 / 2.0,
        }
    }

    /// Interaction image of the 32x32 window with top-left `(x0, y0)`.
    pub fn window(&self, x0: usize, y0: usize) -> Result<InteractionImage> {
        self.check_window(x0, y0)?;
        let img = InteractionImage::new(
            &window(&self.appearance, self.width, x0, y0),
            &window(&self.hand_mask, self.width, x0, y0),
            &window(&self.object_mask, self.width, x0, y0),
        )?;
        Ok(img.with_label(Some(self.label())).with_pose(self.crop_pose(x0, y0)))
    }

    /// Object-only image of the window: hand-free appearance, empty hand
    /// mask, object mask.
    pub fn object_window(&self, x0: usize, y0: usize) -> Result<InteractionImage> {
        self.check_window(x0, y0)?;
        let img = InteractionImage::new(
            &window(&self.object_only, self.width, x0, y0),
            &[0.0; PLANE],
            &window(&self.object_mask, self.width, x0, y0),
        )?;
        Ok(img.with_label(Some(self.label())).with_pose(self.crop_pose(x0, y0)))
    }

    fn window_fraction(&self, mask: &[f32], x0: usize, y0: usize) -> f64 {
        let mut n = 0usize;
        for y in y0..y0 + IMAGE_SIZE {
            n += mask[y * self.width + x0..y * self.width + x0 + IMAGE_SIZE]
                .iter()
                .filter(|&&v| v > 0.5)
                .count();
        }
        n as f64 / PLANE as f64
    }

    pub fn hand_fraction_at(&self, x0: usize, y0: usize) -> f64 {
        self.window_fraction(&self.hand_mask, x0, y0)
    }
}

/// Random 32x32 crops whose hand-mask fraction is at least
/// `min_hand_fraction`, paired with their object-only counterparts.
pub fn extract_crops(scene: &Scene, count: usize, min_hand_fraction: f64, seed: u64) -> Result<Vec<CropSample>> {
    if scene.width < IMAGE_SIZE || scene.height < IMAGE_SIZE {
        return config_err("scene smaller than a crop window");
    }
    if !(0.0..1.0).contains(&min_hand_fraction) {
        return config_err(format!(
            "min_hand_fraction must lie in [0, 1), got {min_hand_fraction}"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xC209));
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0usize;
    while out.len() < count {
        let x0 = rng.gen_range(0..=scene.width - IMAGE_SIZE);
        let y0 = rng.gen_range(0..=scene.height - IMAGE_SIZE);
        if scene.hand_fraction_at(x0, y0) >= min_hand_fraction {
            rejected = 0;
            out.push(CropSample {
                interaction: scene.window(x0, y0)?,
                object: scene.object_window(x0, y0)?,
                x0,
                y0,
            });
        } else {
            rejected += 1;
            if rejected >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::Generation(format!(
                    "scene (prototype {}, seed {}) rejected {MAX_CONSECUTIVE_REJECTIONS} consecutive crops \
                     at min_hand_fraction {min_hand_fraction}",
                    scene.prototype, scene.seed
                )));
            }
        }
    }
    Ok(out)
}

/// Interaction images of random crops with sufficient hand area.
pub fn extract_subimages(
    scene: &Scene,
    count: usize,
    min_hand_fraction: f64,
    seed: u64,
) -> Result<Vec<InteractionImage>> {
    Ok(extract_crops(scene, count, min_hand_fraction, seed)?
        .into_iter()
        .map(|c| c.interaction)
        .collect())
}

/// Object-only windows centered on parts a hand avoids (blades), with no
/// hand pixels inside. Empty when the prototype has no avoided part.
pub fn extract_avoided_part_crops(scene: &Scene, count: usize, seed: u64) -> Result<Vec<InteractionImage>> {
    let half = IMAGE_SIZE / 2;
    let regions: Vec<&Region> = scene.regions.iter().filter(|r| r.avoided).collect();
    if regions.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xB1ADE));
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0usize;
    while out.len() < count {
        let r = regions[rng.gen_range(0..regions.len())];
        let cx = rng.gen_range(r.x0..=r.x1).clamp(half, scene.width - half);
        let cy = rng.gen_range(r.y0..=r.y1).clamp(half, scene.height - half);
        let (x0, y0) = (cx - half, cy - half);
        if scene.hand_fraction_at(x0, y0) == 0.0 {
            rejected = 0;
            out.push(scene.object_window(x0, y0)?.with_label(None));
        } else {
            rejected += 1;
            if rejected >= MAX_CONSECUTIVE_REJECTIONS {
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic() {
        let a = generate_scene(4, 17).unwrap();
        let b = generate_scene(4, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scene(4, 18).unwrap());
        assert!(generate_scene(12, 0).is_err());
    }

    #[test]
    fn masks_binary_values_in_range() {
        for p in 0..PROTOTYPE_COUNT {
            let s = generate_scene(p, 3).unwrap();
            assert!(s.hand_mask.iter().chain(&s.object_mask).all(|&v| v == 0.0 || v == 1.0));
            assert!(s.appearance.iter().chain(&s.object_only).all(|v| (0.0..=1.0).contains(v)));
            assert!(s.hand_area() > 120, "prototype {p} hand area {}", s.hand_area());
            assert!(s.object_mask.iter().any(|&v| v == 1.0));
        }
    }

    #[test]
    fn crops_respect_hand_fraction_and_label() {
        let s = generate_scene(0, 5).unwrap();
        let crops = extract_crops(&s, 40, 0.10, 9).unwrap();
        assert_eq!(crops.len(), 40);
        for c in &crops {
            assert!(c.interaction.hand_fraction() >= 0.10);
            assert_eq!(c.interaction.label, Some(0));
            assert!(c.object.hand_mask().iter().all(|&v| v == 0.0));
        }
        // vacuous constraint accepts anything
        assert_eq!(extract_subimages(&s, 10, 0.0, 1).unwrap().len(), 10);
    }

    #[test]
    fn impossible_fraction_is_a_generation_error() {
        let s = generate_scene(6, 5).unwrap();
        let err = extract_subimages(&s, 1, 0.95, 1).unwrap_err();
        assert!(matches!(err, Error::Generation(msg) if msg.contains("prototype 6")));
    }

    #[test]
    fn avoided_crops_only_for_bladed_objects() {
        let s = generate_scene(4, 2).unwrap();
        let crops = extract_avoided_part_crops(&s, 5, 1).unwrap();
        assert_eq!(crops.len(), 5);
        assert!(crops.iter().all(|c| c.hand_fraction() == 0.0 && c.label.is_none()));
        let mug = generate_scene(0, 2).unwrap();
        assert!(extract_avoided_part_crops(&mug, 5, 1).unwrap().is_empty());
    }
}
