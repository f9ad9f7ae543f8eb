//! Layer-keyed weight sets and their binary encoding.
//!
//! Layout (little-endian): magic `GNWT`, `u32` version, 64-byte hex spec hash,
//! `u32` layer count, then per layer a `u32`-prefixed UTF-8 key, a `u32` tensor
//! count and, per tensor, a `u64` element count followed by `f32` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GNWT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// Layer path such as `3` or `12.b1.3` for layers nested in branches.
    pub key: String,
    pub tensors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub spec_hash: String,
    pub layers: Vec<LayerWeights>,
}

impl Weights {
    pub fn get(&self, key: &str) -> Option<&LayerWeights> {
        self.layers.iter().find(|l| l.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.layers.iter().map(|l| l.key.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let mut hash = [b'0'; 64];
        let h = self.spec_hash.as_bytes();
        hash[..h.len().min(64)].copy_from_slice(&h[..h.len().min(64)]);
        out.extend_from_slice(&hash);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.key.len() as u32).to_le_bytes());
            out.extend_from_slice(layer.key.as_bytes());
            out.extend_from_slice(&(layer.tensors.len() as u32).to_le_bytes());
            for t in &layer.tensors {
                out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                for v in t {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Corrupt("not a weights file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported weights version {version}")));
        }
        let mut hash = [0u8; 64];
        read_exact(&mut r, &mut hash)?;
        let spec_hash = String::from_utf8(hash.to_vec()).map_err(|_| Error::Corrupt("spec hash is not UTF-8".into()))?;
        let count = read_u32(&mut r)? as usize;
        let mut layers = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let klen = read_u32(&mut r)? as usize;
            if klen > r.len() {
                return Err(Error::Corrupt("truncated layer key".into()));
            }
            let key = String::from_utf8(r[..klen].to_vec()).map_err(|_| Error::Corrupt("layer key is not UTF-8".into()))?;
            r = &r[klen..];
            let ntensors = read_u32(&mut r)? as usize;
            let mut tensors = Vec::with_capacity(ntensors.min(16));
            for _ in 0..ntensors {
                let len = read_u64(&mut r)? as usize;
                if len.checked_mul(4).is_none_or(|b| b > r.len()) {
                    return Err(Error::Corrupt(format!("truncated tensor in layer {key}")));
                }
                let (data, rest) = r.split_at(len * 4);
                tensors.push(data.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect());
                r = rest;
            }
            layers.push(LayerWeights { key, tensors });
        }
        if !r.is_empty() {
            return Err(Error::Corrupt("trailing bytes after weights".into()));
        }
        Ok(Self { spec_hash, layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Corrupt("truncated weights file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
