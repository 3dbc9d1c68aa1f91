//! `IIDS` dataset files and PGM/PPM inspection exports.
//!
//! ```text
//! "IIDS" | version u32 | item count u32 | item*
//! item = label i32 (-1 = none) | rotation f32 | tx f32 | ty f32 | 3*32*32 f32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::{Channel, InteractionImage, Pose, CHANNELS, IMAGE_SIZE, PLANE};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

pub const DATASET_MAGIC: &[u8; 4] = b"IIDS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Ordered image collection. Split and generator seed are bookkeeping
/// only; the binary file stores the items.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub items: Vec<InteractionImage>,
    pub split: Option<Split>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(items: Vec<InteractionImage>) -> Self {
        Self {
            items,
            split: None,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn encode_dataset(dataset: &Dataset) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.u32(dataset.items.len() as u32);
    for item in &dataset.items {
        w.i32(item.label.map_or(-1, i32::from));
        w.f32(item.pose.rotation);
        w.f32(item.pose.tx);
        w.f32(item.pose.ty);
        for &v in item.as_slice() {
            w.f32(v);
        }
    }
    w.into_inner()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != DATASET_MAGIC {
        return Err(Error::Format("bad dataset magic, expected IIDS".into()));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let count = r.u32()? as usize;
    let item_bytes = 16 + CHANNELS * PLANE * 4;
    if count.saturating_mul(item_bytes) != r.remaining() {
        return Err(Error::Format(format!(
            "dataset declares {count} items but holds {} payload bytes",
            r.remaining()
        )));
    }
    let mut items = Vec::with_capacity(count);
    for idx in 0..count {
        let label = match r.i32()? {
            -1 => None,
            l @ 0..=255 => Some(l as u8),
            other => return Err(Error::Format(format!("item {idx}: invalid label {other}"))),
        };
        let pose = Pose {
            rotation: r.f32()?,
            tx: r.f32()?,
            ty: r.f32()?,
        };
        let data = (0..CHANNELS * PLANE).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let img = InteractionImage::from_raw(data)
            .map_err(|e| Error::Format(format!("item {idx}: {e}")))?;
        items.push(img.with_label(label).with_pose(pose));
    }
    Ok(Dataset::new(items))
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, encode_dataset(dataset))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PGM (`P5`) of one 32x32 plane or any `width x height` plane.
pub fn encode_pgm(plane: &[f32], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(plane.iter().map(|&v| to_byte(v)));
    out
}

/// Parses a binary PGM (`P5`, maxval up to 255) into values in `[0, 1]`
/// with its width and height.
pub fn decode_pgm(bytes: &[u8]) -> Result<(Vec<f32>, usize, usize)> {
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("expected a P5 PGM, found {}", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field {s:?}")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let payload = &bytes[(i + 1).min(bytes.len())..];
    if payload.len() != w * h {
        return Err(Error::Format(format!("PGM payload has {} bytes, expected {}", payload.len(), w * h)));
    }
    Ok((payload.iter().map(|&b| b as f32 / maxval as f32).collect(), w, h))
}

/// Binary PPM (`P6`) composite: red = hand mask, green = object mask,
/// blue = appearance.
pub fn encode_ppm(image: &InteractionImage) -> Vec<u8> {
    let mut out = format!("P6\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n").into_bytes();
    for i in 0..PLANE {
        out.push(to_byte(image.channel(Channel::Hand)[i]));
        out.push(to_byte(image.channel(Channel::Object)[i]));
        out.push(to_byte(image.channel(Channel::Appearance)[i]));
    }
    out
}

pub fn write_pgm(path: &Path, plane: &[f32], width: usize, height: usize) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(plane, width, height))?;
    Ok(())
}

pub fn write_ppm(path: &Path, image: &InteractionImage) -> Result<()> {
    fs::write(path, encode_ppm(image))?;
    Ok(())
}
