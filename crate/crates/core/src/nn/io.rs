//! Binary network serialization.
//!
//! Layout (all integers and reals little-endian, reals as IEEE-754 f64):
//!
//! ```text
//! magic   b"DSNN"
//! version u32 (= 1)
//! input   u64
//! count   u64                      number of layers
//! specs   count × layer spec       kind u8, then
//!           0 dense:      fan_in u64, fan_out u64, use_bias u8
//!           1 leaky relu: leakiness f64
//!           2 batchnorm:  features u64, momentum f64, eps f64
//! values  per layer in order:
//!           dense:      weights (fan_out × fan_in, row-major), bias if present
//!           batchnorm:  scale, running_mean, running_var
//! ```

use std::io::{Read, Write};

use super::layers::{BatchNormScale, DenseLayer, Layer, LayerSpec, LeakyRelu};
use super::network::Network;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"DSNN";
const VERSION: u32 = 1;

pub(crate) fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for &v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

pub(crate) fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v)
        .ok()
        .filter(|&n| n <= 1 << 32)
        .ok_or_else(|| Error::Format(format!("implausible length {v}")))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

pub fn write_network<W: Write>(w: &mut W, net: &Network) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    write_u64(w, net.input_dim() as u64)?;
    write_u64(w, net.layers().len() as u64)?;
    for layer in net.layers() {
        match layer.spec() {
            LayerSpec::Dense {
                fan_in,
                fan_out,
                use_bias,
            } => {
                write_u8(w, 0)?;
                write_u64(w, fan_in as u64)?;
                write_u64(w, fan_out as u64)?;
                write_u8(w, u8::from(use_bias))?;
            }
            LayerSpec::LeakyRelu { leakiness } => {
                write_u8(w, 1)?;
                write_f64(w, leakiness)?;
            }
            LayerSpec::BatchNorm {
                features,
                momentum,
                eps,
            } => {
                write_u8(w, 2)?;
                write_u64(w, features as u64)?;
                write_f64(w, momentum)?;
                write_f64(w, eps)?;
            }
        }
    }
    for layer in net.layers() {
        match layer {
            Layer::Dense(d) => {
                write_f64s(w, d.weights.as_slice())?;
                if let Some(b) = &d.bias {
                    write_f64s(w, b)?;
                }
            }
            Layer::BatchNorm(b) => {
                write_f64s(w, &b.scale)?;
                write_f64s(w, &b.running_mean)?;
                write_f64s(w, &b.running_var)?;
            }
            Layer::LeakyRelu(_) => {}
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R) -> Result<Network> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a network block (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported network version {version}"
        )));
    }
    let input_dim = read_len(r)?;
    let count = read_len(r)?;
    let mut specs = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        specs.push(match read_u8(r)? {
            0 => LayerSpec::Dense {
                fan_in: read_len(r)?,
                fan_out: read_len(r)?,
                use_bias: read_u8(r)? != 0,
            },
            1 => LayerSpec::LeakyRelu {
                leakiness: read_f64(r)?,
            },
            2 => LayerSpec::BatchNorm {
                features: read_len(r)?,
                momentum: read_f64(r)?,
                eps: read_f64(r)?,
            },
            k => return Err(Error::Format(format!("unknown layer kind {k}"))),
        });
    }
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        layers.push(match spec {
            LayerSpec::Dense {
                fan_in,
                fan_out,
                use_bias,
            } => {
                let weights = Matrix::from_vec(fan_out, fan_in, read_f64s(r, fan_in * fan_out)?)?;
                let bias = if use_bias {
                    Some(read_f64s(r, fan_out)?)
                } else {
                    None
                };
                Layer::Dense(DenseLayer { weights, bias })
            }
            LayerSpec::LeakyRelu { leakiness } => Layer::LeakyRelu(LeakyRelu::new(leakiness)?),
            LayerSpec::BatchNorm {
                features,
                momentum,
                eps,
            } => {
                let mut b = BatchNormScale::new(features, momentum, eps)?;
                b.scale = read_f64s(r, features)?;
                b.running_mean = read_f64s(r, features)?;
                b.running_var = read_f64s(r, features)?;
                Layer::BatchNorm(b)
            }
        });
    }
    Network::from_layers(input_dim, layers)
}
