//! TVCW1 weight files and the in-memory [`Model`].
//!
//! Layout:
//!
//! ```text
//! TVCW1\n
//! {"arch":{...},"tensors":[{"name":...,"shape":[...]},...],"meta":{...}}\n
//! <little-endian f32 payload, tensors concatenated in listed order>
//! ```
//!
//! The JSON header is compact (no whitespace) and sits on a single line.
//! `meta` is optional free-form producer metadata (seeds, epochs) and is
//! carried through unchanged.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{canonical_tensors, ArchConfig, TensorSpec};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &str = "TVCW1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: ArchConfig,
    tensors: Vec<Tensor>,
    meta: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ArchConfig,
    tensors: Vec<TensorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl Model {
    /// Validates names, shapes and finiteness against the canonical layout.
    pub fn new(arch: ArchConfig, tensors: Vec<Tensor>) -> Result<Self> {
        arch.validate()?;
        let specs = canonical_tensors(&arch);
        if tensors.len() != specs.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        for (t, s) in tensors.iter().zip(&specs) {
            if t.name != s.name || t.shape != s.shape {
                return Err(Error::ShapeMismatch(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    t.name, t.shape, s.name, s.shape
                )));
            }
            if t.data.len() != s.numel() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor `{}` holds {} values, shape needs {}",
                    t.name,
                    t.data.len(),
                    s.numel()
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor `{}`", t.name)));
            }
        }
        Ok(Self {
            arch,
            tensors,
            meta: None,
        })
    }

    pub fn zeros(arch: ArchConfig) -> Result<Self> {
        let tensors = canonical_tensors(&arch)
            .into_iter()
            .map(|s| Tensor {
                data: vec![0.0; s.numel()],
                name: s.name,
                shape: s.shape,
            })
            .collect();
        Self::new(arch, tensors)
    }

    /// Uniform fan-in initialization: every weight and bias of a
    /// convolution is drawn from `U(-1/√fan_in, 1/√fan_in)`,
    /// `fan_in = in_channels · taps`.
    pub fn random(arch: ArchConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = canonical_tensors(&arch);
        let mut tensors = Vec::with_capacity(specs.len());
        let mut bound = 0.0f32;
        for s in specs {
            if s.shape.len() == 3 {
                bound = 1.0 / ((s.shape[1] * s.shape[2]) as f32).sqrt();
            }
            let data = (0..s.numel())
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            tensors.push(Tensor {
                name: s.name,
                shape: s.shape,
                data,
            });
        }
        let mut model = Self::new(arch, tensors)?;
        model.meta = Some(serde_json::json!({ "init": "uniform-fan-in", "seed": seed }));
        Ok(model)
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn meta(&self) -> Option<&serde_json::Value> {
        self.meta.as_ref()
    }

    pub fn with_meta(mut self, meta: Option<serde_json::Value>) -> Self {
        self.meta = meta;
        self
    }

    /// Serialize to TVCW1 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            arch: self.arch,
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorSpec {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC.as_bytes());
        out.push(b'\n');
        out.extend(serde_json::to_vec(&header).expect("header serializes"));
        out.push(b'\n');
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parse TVCW1 bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (magic, rest) = split_line(bytes)
            .ok_or_else(|| Error::Format("missing TVCW1 magic line".into()))?;
        if magic != WEIGHTS_MAGIC.as_bytes() {
            return Err(Error::Version {
                expected: WEIGHTS_MAGIC,
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let (header, payload) =
            split_line(rest).ok_or_else(|| Error::Format("missing weight header line".into()))?;
        let header: Header = serde_json::from_slice(header)
            .map_err(|e| Error::Format(format!("weight header: {e}")))?;
        header.arch.validate()?;
        let specs = canonical_tensors(&header.arch);
        if header.tensors.len() != specs.len() {
            return Err(Error::ShapeMismatch(format!(
                "header lists {} tensors, architecture has {}",
                header.tensors.len(),
                specs.len()
            )));
        }
        for (got, want) in header.tensors.iter().zip(&specs) {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
        }
        let expected = specs.iter().map(TensorSpec::numel).sum::<usize>() * 4;
        if payload.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: payload.len(),
            });
        }
        let mut offset = 0;
        let mut tensors = Vec::with_capacity(specs.len());
        for s in specs {
            let len = s.numel();
            let data: Vec<f32> = payload[offset..offset + 4 * len]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            offset += 4 * len;
            tensors.push(Tensor {
                name: s.name,
                shape: s.shape,
                data,
            });
        }
        Ok(Self::new(header.arch, tensors)?.with_meta(header.meta))
    }
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let pos = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..pos], &bytes[pos + 1..]))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Model::from_bytes(&bytes)
}

/// Write a TVCW1 file via a temporary sibling and rename.
pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tvcw.tmp");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&model.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}
