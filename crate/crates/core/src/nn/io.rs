//! Model file layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic "TGWMODEL"
//! u32       format version
//! u64       header length N
//! N bytes   UTF-8 JSON header: input_dims, output_dims, layers
//! f64...    per Dense layer, weights (inputs × units, row-major) then bias (units)
//! ```
//!
//! Parameters are stored as raw IEEE-754 bits, so a loaded model reproduces
//! forward outputs bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layer::Activation;
use super::network::{Layer, Network};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TGWMODEL";
const MAX_HEADER: u64 = 1 << 24;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    input_dims: (usize, usize),
    output_dims: (usize, usize),
    layers: Vec<LayerHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerHeader {
    Dense {
        inputs: usize,
        units: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

pub fn write_model(net: &Network, out: &mut impl Write) -> Result<()> {
    let header = Header {
        input_dims: net.input_dims(),
        output_dims: net.output_dims(),
        layers: net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Dense {
                    weights,
                    activation,
                    ..
                } => LayerHeader::Dense {
                    inputs: weights.nrows(),
                    units: weights.ncols(),
                    activation: *activation,
                },
                Layer::Dropout { rate } => LayerHeader::Dropout { rate: *rate },
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| fmt_err(e.to_string()))?;
    let io = |e: std::io::Error| fmt_err(format!("write failed: {e}"));
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())
        .map_err(io)?;
    out.write_all(&(json.len() as u64).to_le_bytes())
        .map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for layer in net.layers() {
        if let Layer::Dense { weights, bias, .. } = layer {
            for v in weights.iter().chain(bias.iter()) {
                out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
    }
    Ok(())
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|_| fmt_err(format!("truncated file while reading {what}")))
}

fn read_f64s(input: &mut impl Read, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    read_exact(input, &mut buf, what)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_model(input: &mut impl Read) -> Result<Network> {
    let mut magic = [0u8; 8];
    read_exact(input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(fmt_err("not a model file (bad magic)"));
    }
    let mut word = [0u8; 4];
    read_exact(input, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != MODEL_FORMAT_VERSION {
        return Err(fmt_err(format!(
            "format version {version} is not supported (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let mut len = [0u8; 8];
    read_exact(input, &mut len, "header length")?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(fmt_err(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    read_exact(input, &mut json, "header")?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| fmt_err(format!("corrupt header: {e}")))?;

    let mut layers = Vec::with_capacity(header.layers.len());
    for (i, lh) in header.layers.iter().enumerate() {
        match *lh {
            LayerHeader::Dense {
                inputs,
                units,
                activation,
            } => {
                let n = inputs
                    .checked_mul(units)
                    .filter(|&n| n < (1 << 32))
                    .ok_or_else(|| fmt_err(format!("layer {i}: implausible shape")))?;
                let w = read_f64s(input, n, "weights")?;
                let b = read_f64s(input, units, "bias")?;
                layers.push(Layer::Dense {
                    weights: Array2::from_shape_vec((inputs, units), w).expect("sized buffer"),
                    bias: Array1::from(b),
                    activation,
                });
            }
            LayerHeader::Dropout { rate } => layers.push(Layer::Dropout { rate }),
        }
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| fmt_err(e.to_string()))? != 0 {
        return Err(fmt_err("trailing bytes after parameters"));
    }
    Network::from_layers(header.input_dims, header.output_dims, layers)
        .map_err(|e| fmt_err(format!("inconsistent layers: {e}")))
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_model(net, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let mut input = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_model(&mut input)
}
