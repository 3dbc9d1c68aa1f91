//! Object-only images without any known interaction: plain backgrounds and
//! distractor shapes that belong to none of the prototypes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::{InteractionImage, IMAGE_SIZE, PLANE};
use super::raster::{rect, Shape};
use super::scene::derive_seed;
use crate::error::{config_err, Result};

fn random_distractor(rng: &mut ChaCha8Rng) -> Vec<Shape> {
    let cx = rng.gen_range(4.0f32..28.0);
    let cy = rng.gen_range(4.0f32..28.0);
    let rot = rng.gen_range(0.0f32..180.0);
    match rng.gen_range(0..4) {
        // triangle
        0 => {
            let s = rng.gen_range(5.0f32..12.0);
            let pt = |a: f32| (cx + s * a.cos(), cy + s * a.sin());
            let a0 = rot.to_radians();
            vec![Shape::Triangle {
                a: pt(a0),
                b: pt(a0 + 2.2),
                c: pt(a0 + 4.1),
            }]
        }
        // L-bracket
        1 => {
            let (l, t) = (rng.gen_range(5.0f32..10.0), rng.gen_range(1.5f32..3.0));
            let (s, c) = rot.to_radians().sin_cos();
            vec![
                rect(cx, cy, l, t, rot),
                rect(cx + c * l - s * l, cy + s * l + c * l, t, l, rot),
            ]
        }
        // cross
        2 => {
            let (l, t) = (rng.gen_range(5.0f32..11.0), rng.gen_range(1.2f32..2.5));
            vec![rect(cx, cy, l, t, rot), rect(cx, cy, t, l, rot)]
        }
        // star-shaped blob: overlapping thin triangles
        _ => {
            let s = rng.gen_range(5.0f32..10.0);
            let a0 = rot.to_radians();
            (0..3)
                .map(|k| {
                    let a = a0 + k as f32 * 1.047;
                    Shape::Triangle {
                        a: (cx + s * a.cos(), cy + s * a.sin()),
                        b: (cx - s * (a + 0.5).cos(), cy - s * (a + 0.5).sin()),
                        c: (cx - s * (a - 0.5).cos(), cy - s * (a - 0.5).sin()),
                    }
                })
                .collect()
        }
    }
}

/// Generates `count` object-only negative images. Roughly a quarter are
/// bare background; the rest carry one to three distractor shapes.
pub fn make_negative_images(seed: u64, count: usize) -> Result<Vec<InteractionImage>> {
    if count == 0 {
        return config_err("negative image count must be positive");
    }
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4E47 + i as u64));
            let bg = rng.gen_range(0.08f32..0.22);
            let (gx, gy) = (rng.gen_range(-0.004f32..0.004), rng.gen_range(-0.004f32..0.004));
            let n_shapes = if rng.gen_bool(0.25) { 0 } else { rng.gen_range(1..=3) };
            let shapes: Vec<(Vec<Shape>, f32)> = (0..n_shapes)
                .map(|_| {
                    let tone = rng.gen_range(0.35f32..0.80);
                    (random_distractor(&mut rng), tone)
                })
                .collect();
            let mut appearance = vec![0.0; PLANE];
            let mut object = vec![0.0; PLANE];
            for y in 0..IMAGE_SIZE {
                for x in 0..IMAGE_SIZE {
                    let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
                    let noise = rng.gen_range(-0.03f32..0.03);
                    let mut v = bg + gx * (px - 16.0) + gy * (py - 16.0);
                    for (parts, tone) in &shapes {
                        if parts.iter().any(|s| s.contains(px, py)) {
                            v = *tone;
                            object[y * IMAGE_SIZE + x] = 1.0;
                        }
                    }
                    appearance[y * IMAGE_SIZE + x] = (v + noise).clamp(0.0, 1.0);
                }
            }
            InteractionImage::new(&appearance, &[0.0; PLANE], &object)
        })
        .collect()
}
