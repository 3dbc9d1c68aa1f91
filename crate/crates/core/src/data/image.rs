use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Side length of a normalized interaction image.
pub const IMAGE_SIZE: usize = 32;
/// Pixels per channel.
pub const PLANE: usize = IMAGE_SIZE * IMAGE_SIZE;
pub const CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Appearance = 0,
    Hand = 1,
    Object = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Appearance, Channel::Hand, Channel::Object];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Appearance => "appearance",
            Channel::Hand => "hand",
            Channel::Object => "object",
        }
    }
}

/// Rigid pose metadata: rotation in radians, translation in pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: f32,
    pub tx: f32,
    pub ty: f32,
}

/// 3-channel 32x32 image: total appearance, hand mask, object mask.
///
/// Object-only images use the same container with an empty hand mask.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionImage {
    data: Vec<f32>,
    pub label: Option<u8>,
    pub pose: Pose,
}

impl InteractionImage {
    pub fn new(appearance: &[f32], hand_mask: &[f32], object_mask: &[f32]) -> Result<Self> {
        if appearance.len() != PLANE || hand_mask.len() != PLANE || object_mask.len() != PLANE {
            return config_err(format!(
                "interaction image channels must have {PLANE} pixels, got {}/{}/{}",
                appearance.len(),
                hand_mask.len(),
                object_mask.len()
            ));
        }
        let mut data = Vec::with_capacity(CHANNELS * PLANE);
        data.extend_from_slice(appearance);
        data.extend_from_slice(hand_mask);
        data.extend_from_slice(object_mask);
        Self::from_raw(data)
    }

    /// Channel-major `3 * 32 * 32` values.
    pub fn from_raw(data: Vec<f32>) -> Result<Self> {
        if data.len() != CHANNELS * PLANE {
            return config_err(format!(
                "interaction image needs {} values, got {}",
                CHANNELS * PLANE,
                data.len()
            ));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return config_err(format!("pixel value {bad} outside [0, 1]"));
        }
        Ok(Self {
            data,
            label: None,
            pose: Pose::default(),
        })
    }

    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; CHANNELS * PLANE],
            label: None,
            pose: Pose::default(),
        }
    }

    pub fn with_label(mut self, label: Option<u8>) -> Self {
        self.label = label;
        self
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: Channel) -> &[f32] {
        let i = c as usize;
        &self.data[i * PLANE..(i + 1) * PLANE]
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut [f32] {
        let i = c as usize;
        &mut self.data[i * PLANE..(i + 1) * PLANE]
    }

    pub fn appearance(&self) -> &[f32] {
        self.channel(Channel::Appearance)
    }

    pub fn hand_mask(&self) -> &[f32] {
        self.channel(Channel::Hand)
    }

    pub fn object_mask(&self) -> &[f32] {
        self.channel(Channel::Object)
    }

    /// Fraction of pixels whose hand mask is at least 0.5.
    pub fn hand_fraction(&self) -> f64 {
        self.hand_mask().iter().filter(|&&v| v >= 0.5).count() as f64 / PLANE as f64
    }
}

/// Intersection over union of two masks thresholded at `threshold`.
/// Two empty masks have IoU 1.
pub fn mask_iou(a: &[f32], b: &[f32], threshold: f32) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x >= threshold, y >= threshold);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_sizes() {
        let ok = vec![0.5; PLANE];
        assert!(InteractionImage::new(&ok, &ok, &ok).is_ok());
        assert!(InteractionImage::new(&ok[..10], &ok, &ok).is_err());
        let mut bad = ok.clone();
        bad[3] = 1.5;
        assert!(InteractionImage::new(&bad, &ok, &ok).is_err());
    }

    #[test]
    fn iou_cases() {
        let a = [1.0, 1.0, 0.0, 0.0];
        let b = [1.0, 0.0, 1.0, 0.0];
        assert!((mask_iou(&a, &b, 0.5) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(mask_iou(&a, &a, 0.5), 1.0);
        assert_eq!(mask_iou(&[0.0; 4], &[0.0; 4], 0.5), 1.0);
    }
}
