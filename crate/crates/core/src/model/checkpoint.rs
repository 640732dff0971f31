//! Binary checkpoint files.
//!
//! Layout: the magic bytes `ICAMCKPT`, a little-endian `u32` format version,
//! a `u64` header length and a JSON header, followed by every tensor as raw
//! little-endian `f64` values in header order. Floats never pass through
//! text, so a save/load round trip is bit-exact.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Network;
use super::train::Checkpoint;
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::nn::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"ICAMCKPT";
pub const FORMAT_VERSION: u32 = 1;

const STD_MEAN: &str = "standardizer.mean";
const STD_SCALE: &str = "standardizer.scale";
const SIGMAS: &str = "kernel.sigma";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Param,
    Buffer,
    Extra,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    kind: Kind,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    epoch: usize,
    tensors: Vec<Entry>,
}

pub fn to_bytes(ck: &Checkpoint) -> Result<Vec<u8>> {
    let store = &ck.network.store;
    let extras = [
        (STD_MEAN, Tensor::from_vec(&[ck.standardizer.dim()], ck.standardizer.mean.clone())?),
        (STD_SCALE, Tensor::from_vec(&[ck.standardizer.dim()], ck.standardizer.scale.clone())?),
        (SIGMAS, Tensor::from_vec(&[2], vec![ck.sigma_f, ck.sigma_g])?),
    ];
    let mut entries = Vec::new();
    let mut payload: Vec<&Tensor> = Vec::new();
    for (name, t) in store.params() {
        entries.push(Entry {
            name: name.clone(),
            kind: Kind::Param,
            shape: t.shape().to_vec(),
        });
        payload.push(t);
    }
    for (name, t) in store.buffers() {
        entries.push(Entry {
            name: name.clone(),
            kind: Kind::Buffer,
            shape: t.shape().to_vec(),
        });
        payload.push(t);
    }
    for (name, t) in &extras {
        entries.push(Entry {
            name: name.to_string(),
            kind: Kind::Extra,
            shape: t.shape().to_vec(),
        });
        payload.push(t);
    }
    let header = serde_json::to_vec(&Header {
        config: ck.network.config.clone(),
        epoch: ck.epoch,
        tensors: entries,
    })?;
    let mut out = Vec::with_capacity(20 + header.len() + 8 * payload.iter().map(|t| t.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in payload {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let corrupt = |m: &str| Error::Data(format!("checkpoint: {m}"));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..).ok_or_else(|| corrupt("truncated"))?;
    if body.len() < hlen {
        return Err(corrupt("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])?;
    header.config.validate()?;
    let mut cursor = &body[hlen..];
    let mut store = ParamStore::new();
    let (mut mean, mut scale, mut sigmas) = (None, None, None);
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        if cursor.len() < 8 * n {
            return Err(corrupt(&format!("payload ends inside {}", e.name)));
        }
        let data: Vec<f64> = cursor[..8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        cursor = &cursor[8 * n..];
        let t = Tensor::from_vec(&e.shape, data)?;
        match (e.kind, e.name.as_str()) {
            (Kind::Param, _) => store.insert(e.name, t),
            (Kind::Buffer, _) => store.insert_buffer(e.name, t),
            (Kind::Extra, STD_MEAN) => mean = Some(t.into_data()),
            (Kind::Extra, STD_SCALE) => scale = Some(t.into_data()),
            (Kind::Extra, SIGMAS) => sigmas = Some(t.into_data()),
            (Kind::Extra, other) => return Err(corrupt(&format!("unknown entry {other}"))),
        }
    }
    if !cursor.is_empty() {
        return Err(corrupt("trailing bytes"));
    }
    let (Some(mean), Some(scale), Some(sigmas)) = (mean, scale, sigmas) else {
        return Err(corrupt("missing standardizer or bandwidths"));
    };
    if sigmas.len() != 2 || mean.len() != scale.len() {
        return Err(corrupt("malformed standardizer or bandwidths"));
    }
    let reference = Network::new(header.config.clone())?;
    for (name, t) in reference.store.params() {
        let got = store.get(name).map_err(|_| corrupt(&format!("missing parameter {name}")))?;
        if got.shape() != t.shape() {
            return Err(Error::ShapeMismatch {
                expected: t.shape().to_vec(),
                got: got.shape().to_vec(),
            });
        }
    }
    Ok(Checkpoint {
        network: Network {
            config: header.config,
            store,
        },
        standardizer: Standardizer { mean, scale },
        sigma_f: sigmas[0],
        sigma_g: sigmas[1],
        epoch: header.epoch,
    })
}

pub fn save(ck: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = to_bytes(ck)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
