//! Parameter files: an 8-byte little-endian header length, a JSON header,
//! then every parameter as little-endian `f32` in flat order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpShape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsHeader {
    pub format: String,
    pub shape: MlpShape,
    pub tensors: Vec<(String, Vec<usize>)>,
    pub seed: u64,
    pub config_hash: String,
}

const FORMAT: &str = "corruptlab-params-v1";

pub fn save_params(path: &Path, net: &Mlp<f32>, seed: u64, config_hash: &str) -> Result<()> {
    let header = ParamsHeader {
        format: FORMAT.into(),
        shape: net.shape,
        tensors: net.shape.tensors().into_iter().map(|(n, d)| (n.to_string(), d)).collect(),
        seed,
        config_hash: config_hash.into(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(8 + json.len() + 4 * net.param_count());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in net.tensors() {
        for x in t {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<(ParamsHeader, Mlp<f32>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let corrupt = |m: &str| Error::InvalidParameter(format!("{}: {m}", path.display()));
    if bytes.len() < 8 {
        return Err(corrupt("truncated header"));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| corrupt("truncated header"))?;
    let header: ParamsHeader = serde_json::from_slice(body)?;
    if header.format != FORMAT {
        return Err(corrupt("unknown format"));
    }
    let data = &bytes[8 + hlen..];
    let mut net = Mlp::zeros(header.shape);
    if data.len() != 4 * net.param_count() {
        return Err(Error::DimensionMismatch { expected: 4 * net.param_count(), got: data.len() });
    }
    let mut chunks = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    for t in net.tensors_mut() {
        for x in t.iter_mut() {
            *x = chunks.next().expect("length checked");
        }
    }
    Ok((header, net))
}
