use super::image::{Channel, InteractionImage, IMAGE_SIZE, PLANE};

/// Rotates one 32x32 plane by `rotation` radians about the image center and
/// then shifts it by `(tx, ty)` pixels. Nearest-neighbor sampling, zero fill.
pub fn rigid_transform_plane(plane: &[f32], rotation: f32, tx: f32, ty: f32) -> Vec<f32> {
    let n = IMAGE_SIZE as f32;
    let c = n / 2.0;
    let (sin, cos) = rotation.sin_cos();
    let mut out = vec![0.0; PLANE];
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            let dx = x as f32 + 0.5 - c - tx;
            let dy = y as f32 + 0.5 - c - ty;
            // inverse rotation maps the output pixel back into the source
            let sx = cos * dx + sin * dy + c;
            let sy = -sin * dx + cos * dy + c;
            let (ix, iy) = (sx.floor(), sy.floor());
            if ix >= 0.0 && iy >= 0.0 && ix < n && iy < n {
                out[y * IMAGE_SIZE + x] = plane[iy as usize * IMAGE_SIZE + ix as usize];
            }
        }
    }
    out
}

/// Rigid pose normalization of an interaction image. Masks are
/// re-binarized at 0.5.
pub fn normalize_pose(image: &InteractionImage, rotation: f32, translation: (f32, f32)) -> InteractionImage {
    let mut out = image.clone();
    for ch in Channel::ALL {
        let mut plane = rigid_transform_plane(image.channel(ch), rotation, translation.0, translation.1);
        if ch != Channel::Appearance {
            plane.iter_mut().for_each(|v| *v = if *v >= 0.5 { 1.0 } else { 0.0 });
        }
        out.channel_mut(ch).copy_from_slice(&plane);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::image::mask_iou;
    use crate::data::scene::{extract_subimages, generate_scene};
    use std::f32::consts::PI;

    #[test]
    fn identity_transform() {
        let s = generate_scene(2, 4).unwrap();
        let img = &extract_subimages(&s, 1, 0.1, 0).unwrap()[0];
        assert_eq!(&normalize_pose(img, 0.0, (0.0, 0.0)), img);
    }

    #[test]
    fn half_turn_twice_restores_masks() {
        for proto in 0..12 {
            let s = generate_scene(proto, 8).unwrap();
            let img = &extract_subimages(&s, 1, 0.1, 2).unwrap()[0];
            let twice = normalize_pose(&normalize_pose(img, PI, (0.0, 0.0)), PI, (0.0, 0.0));
            assert!(mask_iou(twice.hand_mask(), img.hand_mask(), 0.5) >= 0.9);
            assert!(mask_iou(twice.object_mask(), img.object_mask(), 0.5) >= 0.9);
        }
    }

    #[test]
    fn rotation_preserves_mask_area() {
        let s = generate_scene(7, 1).unwrap();
        let img = &extract_subimages(&s, 1, 0.1, 5).unwrap()[0];
        // a centered blob so nothing leaves the frame
        let mut centered = img.clone();
        let blob: Vec<f32> = (0..PLANE)
            .map(|i| {
                let (x, y) = ((i % 32) as f32 - 15.5, (i / 32) as f32 - 15.5);
                if x * x / 64.0 + y * y / 25.0 <= 1.0 { 1.0 } else { 0.0 }
            })
            .collect();
        centered.channel_mut(Channel::Hand).copy_from_slice(&blob);
        let before = blob.iter().sum::<f32>();
        for deg in [15.0f32, 33.0, 90.0, 137.0] {
            let r = normalize_pose(&centered, deg.to_radians(), (0.0, 0.0));
            let after = r.hand_mask().iter().sum::<f32>();
            assert!((after - before).abs() <= 0.1 * before, "{deg}: {before} -> {after}");
        }
    }

    #[test]
    fn translation_shifts_content() {
        let mut plane = vec![0.0; PLANE];
        plane[10 * 32 + 10] = 1.0;
        let out = rigid_transform_plane(&plane, 0.0, 3.0, -2.0);
        assert_eq!(out[8 * 32 + 13], 1.0);
    }
}
