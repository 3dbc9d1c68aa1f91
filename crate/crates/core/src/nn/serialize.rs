//! Binary model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "IDSM" | version u32 | role u8 | input rank u32 | input dims u32*
//!        | layer count u32 | layer*
//! layer  = tag u8 then
//!   0 conv:       stride u32, pad u32, weight tensor, bias tensor
//!   1 dense:      weight tensor, bias tensor
//!   2 activation: u8 (0 tanh, 1 sigmoid)
//!   3 reshape:    rank u32, dims u32*
//! tensor = rank u32, dims u32*, values f32*
//! ```

use std::fs;
use std::path::Path;

use super::layer::{Activation, Conv2d, Dense, Layer};
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

pub const MODEL_MAGIC: &[u8; 4] = b"IDSM";
pub const MODEL_VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_DENSE: u8 = 1;
const TAG_ACTIVATION: u8 = 2;
const TAG_RESHAPE: u8 = 3;

/// What a serialized network is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelRole {
    Generic = 0,
    Encoder = 1,
    Decoder = 2,
    Inference = 3,
}

impl ModelRole {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => ModelRole::Generic,
            1 => ModelRole::Encoder,
            2 => ModelRole::Decoder,
            3 => ModelRole::Inference,
            other => return Err(Error::Format(format!("unknown model role tag {other}"))),
        })
    }
}

fn write_dims(w: &mut ByteWriter, dims: &[usize]) {
    w.u32(dims.len() as u32);
    for &d in dims {
        w.u32(d as u32);
    }
}

fn write_tensor(w: &mut ByteWriter, t: &Tensor<f32>) {
    write_dims(w, t.shape());
    for &v in t.data() {
        w.f32(v);
    }
}

fn read_dims(r: &mut ByteReader) -> Result<Vec<usize>> {
    let rank = r.u32()? as usize;
    if rank > 8 {
        return Err(Error::Format(format!("implausible tensor rank {rank}")));
    }
    (0..rank).map(|_| r.u32().map(|d| d as usize)).collect()
}

fn read_tensor(r: &mut ByteReader) -> Result<Tensor<f32>> {
    let dims = read_dims(r)?;
    let len: usize = dims.iter().product();
    if len * 4 > r.remaining() {
        return Err(Error::Format("tensor payload truncated".into()));
    }
    let data = (0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    Tensor::new(dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_network(net: &Network<f32>, role: ModelRole) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.u8(role as u8);
    write_dims(&mut w, net.input_shape());
    w.u32(net.layers().len() as u32);
    for layer in net.layers() {
        match layer {
            Layer::Conv2d(c) => {
                w.u8(TAG_CONV);
                w.u32(c.stride as u32);
                w.u32(c.pad as u32);
                write_tensor(&mut w, &c.weight);
                write_tensor(&mut w, &c.bias);
            }
            Layer::Dense(d) => {
                w.u8(TAG_DENSE);
                write_tensor(&mut w, &d.weight);
                write_tensor(&mut w, &d.bias);
            }
            Layer::Activation(a) => {
                w.u8(TAG_ACTIVATION);
                w.u8(match a {
                    Activation::Tanh => 0,
                    Activation::Sigmoid => 1,
                });
            }
            Layer::Reshape(shape) => {
                w.u8(TAG_RESHAPE);
                write_dims(&mut w, shape);
            }
        }
    }
    w.into_inner()
}

pub fn decode_network(bytes: &[u8]) -> Result<(Network<f32>, ModelRole)> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("bad model magic, expected IDSM".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let role = ModelRole::from_u8(r.u8()?)?;
    let input_shape = read_dims(&mut r)?;
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(256));
    for _ in 0..count {
        let layer = match r.u8()? {
            TAG_CONV => {
                let stride = r.u32()? as usize;
                let pad = r.u32()? as usize;
                let weight = read_tensor(&mut r)?;
                let bias = read_tensor(&mut r)?;
                Layer::Conv2d(Conv2d::new(weight, bias, stride, pad).map_err(|e| Error::Format(e.to_string()))?)
            }
            TAG_DENSE => {
                let weight = read_tensor(&mut r)?;
                let bias = read_tensor(&mut r)?;
                Layer::Dense(Dense::new(weight, bias).map_err(|e| Error::Format(e.to_string()))?)
            }
            TAG_ACTIVATION => Layer::Activation(match r.u8()? {
                0 => Activation::Tanh,
                1 => Activation::Sigmoid,
                other => return Err(Error::Format(format!("unknown activation tag {other}"))),
            }),
            TAG_RESHAPE => Layer::Reshape(read_dims(&mut r)?),
            other => return Err(Error::Format(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after model", r.remaining())));
    }
    let net = Network::new(input_shape, layers).map_err(|e| Error::Format(e.to_string()))?;
    Ok((net, role))
}

pub fn save_network(net: &Network<f32>, role: ModelRole, path: &Path) -> Result<()> {
    fs::write(path, encode_network(net, role))?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<(Network<f32>, ModelRole)> {
    decode_network(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::NetworkBuilder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Network<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        NetworkBuilder::new(&[2, 8, 8], &mut rng)
            .conv(3, 3, 2, 1)
            .tanh()
            .dense(5)
            .sigmoid()
            .dense(12)
            .reshape(&[3, 2, 2])
            .build()
            .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample();
        let bytes = encode_network(&net, ModelRole::Encoder);
        let (back, role) = decode_network(&bytes).unwrap();
        assert_eq!(role, ModelRole::Encoder);
        assert_eq!(back, net);
        assert_eq!(encode_network(&back, role), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = encode_network(&sample(), ModelRole::Decoder);
        assert_eq!(&bytes[..4], b"IDSM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes[8], 2);
    }

    #[test]
    fn truncation_and_version_errors() {
        let bytes = encode_network(&sample(), ModelRole::Generic);
        for cut in [0, 3, 9, 20, bytes.len() - 1] {
            assert!(matches!(decode_network(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            decode_network(&v2),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(decode_network(&bad), Err(Error::Format(_))));
    }
}
