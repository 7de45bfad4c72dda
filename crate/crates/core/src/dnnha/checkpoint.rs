//! Layout: magic `DNNHA1`, one version byte, the manifest length as a
//! little-endian u64, the JSON manifest, then every tensor as little-endian
//! f64 values in manifest order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchSpec, DnnError, ModelParams};
use crate::ad::Array;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"DNNHA1";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Free-form training metadata echoed into the manifest.
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    arch: ArchSpec,
    tensors: Vec<TensorEntry>,
    metadata: serde_json::Value,
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<(), DnnError> {
    ckpt.params.validate()?;
    let manifest = Manifest {
        arch: ckpt.params.spec.clone(),
        tensors: ckpt
            .params
            .names
            .iter()
            .zip(&ckpt.params.values)
            .map(|(n, v)| TensorEntry { name: n.clone(), shape: v.shape().to_vec() })
            .collect(),
        metadata: ckpt.metadata.clone(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| DnnError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[CHECKPOINT_VERSION])?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(8 * ckpt.params.count());
    for v in &ckpt.params.values {
        for x in v.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, DnnError> {
    let bad = |m: &str| DnnError::Checkpoint(m.to_string());
    let mut head = [0u8; 15];
    r.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
    if &head[..6] != CHECKPOINT_MAGIC {
        return Err(bad("not a DNNHA1 checkpoint"));
    }
    if head[6] != CHECKPOINT_VERSION {
        return Err(DnnError::Checkpoint(format!("unsupported version {}", head[6])));
    }
    let len = u64::from_le_bytes(head[7..15].try_into().expect("8 bytes")) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| bad("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(&json).map_err(|e| DnnError::Checkpoint(format!("manifest: {e}")))?;
    let mut names = Vec::with_capacity(manifest.tensors.len());
    let mut values = Vec::with_capacity(manifest.tensors.len());
    for t in manifest.tensors {
        let n: usize = t.shape.iter().product();
        let mut raw = vec![0u8; 8 * n];
        r.read_exact(&mut raw).map_err(|_| DnnError::Checkpoint(format!("truncated tensor {}", t.name)))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        values.push(Array::new(t.shape, data)?);
        names.push(t.name);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after tensors"));
    }
    let params = ModelParams { spec: manifest.arch, names, values };
    params.validate()?;
    Ok(Checkpoint { params, metadata: manifest.metadata })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), DnnError> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ckpt)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, DnnError> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(bytes.as_slice())
}
