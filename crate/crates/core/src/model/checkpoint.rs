//! Bit-exact binary container for models, optimizer state, and latents.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "IRRM" | version u32 | header_len u32 | header bytes
//! | tensor_count u32
//! | per tensor: name_len u32, name bytes, rank u32, dims u32 x rank,
//!               f32 data (little-endian)
//! | crc32 u32 over all preceding bytes
//! ```
//!
//! The header is plain UTF-8 `key=value` lines. Model files carry the
//! architecture keys plus whatever extras the writer appends (training step,
//! seed); latent files carry `kind=latents` and store the levels as tensors
//! `z1..zN`, optionally alongside the exact low-resolution tensor `y` so a
//! stored round trip is not limited by 8-bit quantization.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

use super::{CouplingMode, EbKind, IrrmModel, LatentPyramid, ModelConfig};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"IRRM";

// CRC-32 (IEEE), table-driven.
fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 {
                0xedb8_8320 ^ (c >> 1)
            } else {
                c >> 1
            };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

pub fn crc32(data: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(crc32_table);
    let mut c = !0u32;
    for &b in data {
        c = table[((c ^ b as u32) & 0xff) as usize] ^ (c >> 8);
    }
    !c
}

#[derive(Clone, Debug)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl TensorEntry {
    pub fn from_tensor(name: impl Into<String>, t: &Tensor<f32>) -> Self {
        let s = t.shape();
        TensorEntry {
            name: name.into(),
            dims: vec![s.n as u32, s.c as u32, s.h as u32, s.w as u32],
            data: t.data().to_vec(),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor<f32>> {
        if self.dims.len() != 4 {
            return Err(Error::invalid(
                "checkpoint",
                format!(
                    "tensor `{}` has rank {}, expected 4",
                    self.name,
                    self.dims.len()
                ),
            ));
        }
        let shape = Shape::new(
            self.dims[0] as usize,
            self.dims[1] as usize,
            self.dims[2] as usize,
            self.dims[3] as usize,
        );
        Tensor::from_vec(shape, self.data.clone())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Container {
    pub header: Vec<(String, String)>,
    pub tensors: Vec<TensorEntry>,
}

impl Container {
    pub fn header_get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorEntry> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let mut header = String::new();
        for (k, v) in &self.header {
            header.push_str(k);
            header.push('=');
            header.push_str(v);
            header.push('\n');
        }
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(header.as_bytes());
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            buf.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            buf.extend_from_slice(t.name.as_bytes());
            buf.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                buf.extend_from_slice(&d.to_le_bytes());
            }
            for &v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    /// Atomic write: temp file in the same directory, rename on success.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Self> {
        let fail = |msg: &str| Error::Checkpoint {
            path: path.to_string(),
            msg: msg.to_string(),
        };
        if bytes.len() < 16 {
            return Err(fail("file too short"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32(body) != stored_crc {
            return Err(fail("CRC mismatch, file is corrupt"));
        }
        if &body[..4] != MAGIC {
            return Err(fail("bad magic, not a model container"));
        }
        struct Cursor<'a> {
            body: &'a [u8],
            pos: usize,
        }
        impl<'a> Cursor<'a> {
            fn take(&mut self, n: usize) -> Option<&'a [u8]> {
                let s = self.body.get(self.pos..self.pos.checked_add(n)?)?;
                self.pos += n;
                Some(s)
            }
            fn u32(&mut self) -> Option<u32> {
                self.take(4)
                    .map(|s| u32::from_le_bytes(s.try_into().unwrap()))
            }
        }
        let mut cur = Cursor { body, pos: 4 };
        let truncated = || fail("truncated file");

        let version = cur.u32().ok_or_else(truncated)?;
        if version != FORMAT_VERSION {
            return Err(fail(&format!("unsupported format version {version}")));
        }
        let header_len = cur.u32().ok_or_else(truncated)? as usize;
        let header_bytes = cur.take(header_len).ok_or_else(truncated)?;
        let header_str =
            std::str::from_utf8(header_bytes).map_err(|_| fail("header is not valid UTF-8"))?;
        let header = header_str
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| match l.split_once('=') {
                Some((k, v)) => Ok((k.to_string(), v.to_string())),
                None => Err(fail(&format!("malformed header line `{l}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let count = cur.u32().ok_or_else(truncated)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = cur.u32().ok_or_else(truncated)? as usize;
            let name = std::str::from_utf8(cur.take(name_len).ok_or_else(truncated)?)
                .map_err(|_| fail("tensor name is not valid UTF-8"))?
                .to_string();
            let rank = cur.u32().ok_or_else(truncated)? as usize;
            let mut dims = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                dims.push(cur.u32().ok_or_else(truncated)?);
            }
            let numel = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
                .ok_or_else(|| fail("tensor dims overflow"))?;
            let raw = cur
                .take(
                    numel
                        .checked_mul(4)
                        .ok_or_else(|| fail("tensor dims overflow"))?,
                )
                .ok_or_else(truncated)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(TensorEntry { name, dims, data });
        }
        if cur.pos != body.len() {
            return Err(fail("trailing bytes after tensor table"));
        }
        Ok(Container { header, tensors })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Container::from_bytes(&bytes, &path.display().to_string())
    }
}

fn config_header(cfg: &ModelConfig) -> Vec<(String, String)> {
    let kv = |k: &str, v: String| (k.to_string(), v);
    vec![
        kv("kind", "model".into()),
        kv("scale", cfg.scale.to_string()),
        kv("channels", cfg.channels.to_string()),
        kv("num_rdm", cfg.num_rdm().to_string()),
        kv("irbs_per_rdm", cfg.irbs_per_rdm.to_string()),
        kv("hidden", cfg.hidden.to_string()),
        kv("eb_kind", cfg.eb_kind.to_string()),
        kv("coupling_mode", cfg.coupling.to_string()),
        kv("clamp_alpha", cfg.clamp_alpha.to_string()),
        kv("slope", cfg.slope.to_string()),
        kv("long_skip", cfg.long_skip.to_string()),
    ]
}

fn config_from_header(c: &Container, path: &str) -> Result<ModelConfig> {
    let get = |key: &str| -> Result<&str> {
        c.header_get(key).ok_or_else(|| Error::Checkpoint {
            path: path.to_string(),
            msg: format!("missing header key `{key}`"),
        })
    };
    let bad = |key: &str, v: &str| Error::Checkpoint {
        path: path.to_string(),
        msg: format!("bad value `{v}` for `{key}`"),
    };
    let parse_usize = |key: &str| -> Result<usize> {
        let v = get(key)?;
        v.parse().map_err(|_| bad(key, v))
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        let v = get(key)?;
        v.parse().map_err(|_| bad(key, v))
    };
    let eb_kind: EbKind = {
        let v = get("eb_kind")?;
        v.parse().map_err(|_| bad("eb_kind", v))?
    };
    let coupling: CouplingMode = {
        let v = get("coupling_mode")?;
        v.parse().map_err(|_| bad("coupling_mode", v))?
    };
    let long_skip = {
        let v = get("long_skip")?;
        v.parse().map_err(|_| bad("long_skip", v))?
    };
    Ok(ModelConfig {
        scale: parse_usize("scale")?,
        channels: parse_usize("channels")?,
        irbs_per_rdm: parse_usize("irbs_per_rdm")?,
        hidden: parse_usize("hidden")?,
        eb_kind,
        coupling,
        clamp_alpha: parse_f64("clamp_alpha")?,
        slope: parse_f64("slope")?,
        long_skip,
    })
}

/// Serialize a model, optional extra header entries (training step, seed),
/// and optional extra tensors (optimizer moments).
pub fn save_model(
    model: &IrrmModel<f32>,
    extra_header: &[(String, String)],
    extra_tensors: Vec<TensorEntry>,
    path: &Path,
) -> Result<()> {
    let mut header = config_header(model.config());
    header.extend(extra_header.iter().cloned());
    let mut tensors: Vec<TensorEntry> = model
        .params()
        .into_iter()
        .map(|(name, t)| TensorEntry::from_tensor(name, t))
        .collect();
    tensors.extend(extra_tensors);
    Container { header, tensors }.write(path)
}

/// Load a model; returns the container too so callers can pick up extras
/// (optimizer moments, step counter).
pub fn load_model(path: &Path) -> Result<(IrrmModel<f32>, Container)> {
    let container = Container::read(path)?;
    let path_str = path.display().to_string();
    if container.header_get("kind") != Some("model") {
        return Err(Error::Checkpoint {
            path: path_str,
            msg: "not a model container".into(),
        });
    }
    let cfg = config_from_header(&container, &path_str)?;
    let mut model = IrrmModel::init(cfg, 0)?;
    for (name, slot) in model.params_mut() {
        let entry = container.tensor(&name).ok_or_else(|| Error::Checkpoint {
            path: path_str.clone(),
            msg: format!("missing tensor `{name}`"),
        })?;
        let t = entry.to_tensor()?;
        if t.shape() != slot.shape() {
            return Err(Error::Checkpoint {
                path: path_str.clone(),
                msg: format!(
                    "tensor `{name}` has shape {}, expected {}",
                    t.shape(),
                    slot.shape()
                ),
            });
        }
        *slot = t.requires_grad(true);
    }
    Ok((model, container))
}

/// Store a latent pyramid, optionally with the exact (unquantized) LR tensor.
pub fn save_latents(
    pyramid: &LatentPyramid<f32>,
    lr: Option<&Tensor<f32>>,
    path: &Path,
) -> Result<()> {
    let mut header = vec![
        ("kind".to_string(), "latents".to_string()),
        ("levels".to_string(), pyramid.levels.len().to_string()),
    ];
    header.push(("has_lr".to_string(), lr.is_some().to_string()));
    let mut tensors = Vec::new();
    for (i, z) in pyramid.levels.iter().enumerate() {
        tensors.push(TensorEntry::from_tensor(format!("z{}", i + 1), z));
    }
    if let Some(y) = lr {
        tensors.push(TensorEntry::from_tensor("y", y));
    }
    Container { header, tensors }.write(path)
}

pub fn load_latents(path: &Path) -> Result<(LatentPyramid<f32>, Option<Tensor<f32>>)> {
    let container = Container::read(path)?;
    let path_str = path.display().to_string();
    if container.header_get("kind") != Some("latents") {
        return Err(Error::Checkpoint {
            path: path_str,
            msg: "not a latent container".into(),
        });
    }
    let levels: usize = container
        .header_get("levels")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint {
            path: path_str.clone(),
            msg: "missing or bad `levels`".into(),
        })?;
    let mut out = Vec::with_capacity(levels);
    for i in 1..=levels {
        let name = format!("z{i}");
        let entry = container.tensor(&name).ok_or_else(|| Error::Checkpoint {
            path: path_str.clone(),
            msg: format!("missing tensor `{name}`"),
        })?;
        out.push(entry.to_tensor()?);
    }
    let lr = container.tensor("y").map(|e| e.to_tensor()).transpose()?;
    Ok((LatentPyramid { levels: out }, lr))
}

/// Map of optimizer moment tensors stored alongside the model.
pub fn moment_tensors(container: &Container, prefix: &str) -> HashMap<String, Vec<f32>> {
    container
        .tensors
        .iter()
        .filter_map(|t| {
            t.name
                .strip_prefix(prefix)
                .map(|rest| (rest.to_string(), t.data.clone()))
        })
        .collect()
}
