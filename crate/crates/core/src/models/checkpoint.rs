use std::path::Path;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IKCK";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Named parameter blob.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

/// Decoded checkpoint contents.
///
/// Layout (little endian): magic, `u16` version, `u32` header length, the
/// JSON model config, `u32` tensor count, then per tensor `u16` name length,
/// name, `u32` rows, `u32` cols and the `f32` values row-major. A trailing
/// `u8` flags optional Adam state: `u64` step, four `f64` hyperparameters,
/// then the first and second moments of every tensor in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor>,
    pub adam: Option<Adam<f32>>,
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>, adam: Option<&Adam<f32>>) -> Self {
        Self {
            config: model.config().clone(),
            tensors: model
                .store
                .iter()
                .map(|p| Tensor {
                    name: p.name.clone(),
                    rows: p.rows,
                    cols: p.cols,
                    values: p.value.clone(),
                })
                .collect(),
            adam: adam.cloned(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let header = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.rows as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols as u32).to_le_bytes());
            t.values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        match &self.adam {
            None => out.push(0),
            Some(a) => {
                out.push(1);
                out.extend_from_slice(&a.step.to_le_bytes());
                for h in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
                    out.extend_from_slice(&h.to_le_bytes());
                }
                for moments in [&a.m, &a.v] {
                    for m in moments.iter() {
                        m.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
                    }
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let header_len = r.u32()? as usize;
        let header = std::str::from_utf8(r.take(header_len)?)
            .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        let config = ModelConfig::from_json(header)
            .map_err(|e| Error::Checkpoint(format!("invalid config header: {e}")))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let values = r.f32s(rows.checked_mul(cols).ok_or_else(|| {
                Error::Checkpoint(format!("tensor {name} has an impossible shape"))
            })?)?;
            tensors.push(Tensor {
                name,
                rows,
                cols,
                values,
            });
        }
        let adam = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                let mut h = [0.0; 4];
                for v in &mut h {
                    *v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                }
                let mut read = || -> Result<Vec<Vec<f32>>> {
                    tensors.iter().map(|t| r.f32s(t.values.len())).collect()
                };
                let m = read()?;
                let v = read()?;
                Some(Adam {
                    config: AdamConfig {
                        lr: h[0],
                        beta1: h[1],
                        beta2: h[2],
                        eps: h[3],
                    },
                    step,
                    m,
                    v,
                })
            }
            f => return Err(Error::Checkpoint(format!("bad optimizer flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after the checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            config,
            tensors,
            adam,
        })
    }

    /// Builds the model described by the header and fills in the tensors.
    pub fn into_model(self) -> Result<(Model<f32>, Option<Adam<f32>>)> {
        let mut model = Model::new(self.config.clone(), 0)?;
        model.load_tensors(&self.tensors)?;
        Ok((model, self.adam))
    }
}

impl Model<f32> {
    /// Replaces every parameter from `tensors`, which must match this
    /// model's layers by name, order and shape.
    pub fn load_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        if tensors.len() != self.store.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, {} model expects {}",
                tensors.len(),
                self.config().kind,
                self.store.len()
            )));
        }
        for (p, t) in self.store.iter().zip(tensors) {
            if p.name != t.name {
                return Err(Error::Checkpoint(format!(
                    "layer mismatch: expected {}, found {}",
                    p.name, t.name
                )));
            }
            if (p.rows, p.cols) != (t.rows, t.cols) {
                return Err(Error::Checkpoint(format!(
                    "layer {}: expected {}x{}, found {}x{}",
                    p.name, p.rows, p.cols, t.rows, t.cols
                )));
            }
        }
        for (p, t) in self.store.iter_mut().zip(tensors) {
            p.value.copy_from_slice(&t.values);
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn save_checkpoint(path: &Path, model: &Model<f32>, adam: Option<&Adam<f32>>) -> Result<()> {
    std::fs::write(path, Checkpoint::from_model(model, adam).encode()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, Option<Adam<f32>>)> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound {
            what: "checkpoint",
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    Checkpoint::decode(&bytes)?.into_model()
}
