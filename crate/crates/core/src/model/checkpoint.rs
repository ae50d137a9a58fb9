//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "MLNMTCKP"
//! version    u8
//! hyper      u32 block length, then the fields below
//!            u64 × 6  source/target vocab, embedding, hidden, attention, readout
//!            f64 × 2  dropout rates
//!            u8       precision tag
//!            u64      seed
//! count      u32 tensor records, each:
//!            u32 name length, name bytes, u8 rank, u64 × rank dims,
//!            u8 precision tag, little-endian IEEE-754 payload
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::params::{Hyperparameters, ModelParameters, Param};
use super::{Model, ModelError};
use crate::tensor::{Precision, Tensor};

pub const MAGIC: &[u8; 8] = b"MLNMTCKP";
pub const FORMAT_VERSION: u8 = 1;
/// Byte offset of the version field.
pub const VERSION_OFFSET: usize = MAGIC.len();

const HYPER_BLOCK_LEN: u32 = 6 * 8 + 2 * 8 + 1 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("checkpoint truncated while reading {context}")]
    Truncated { context: String },
    #[error("checkpoint inconsistent: {0}")]
    Inconsistent(String),
}

struct Reader<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Reader<'b> {
    fn take(&mut self, n: usize, context: &str) -> Result<&'b [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated { context: context.to_string() });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, context: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, context)?[0])
    }

    fn u32(&mut self, context: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, context)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, context: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, context)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, context: &str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, context)?.try_into().expect("8 bytes")))
    }
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let h = &model.hyper;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&HYPER_BLOCK_LEN.to_le_bytes());
    for v in [h.source_vocab_size, h.target_vocab_size, h.embedding_dim, h.hidden_dim, h.attention_dim, h.readout_dim] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&h.dropout_embedding_hidden.to_le_bytes());
    out.extend_from_slice(&h.dropout_input_output.to_le_bytes());
    out.push(h.precision.tag());
    out.extend_from_slice(&h.seed.to_le_bytes());

    let tensors = model.params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (p, t) in Param::all().into_iter().zip(tensors) {
        let name = p.name();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.push(h.precision.tag());
        match h.precision {
            Precision::F32 => {
                for &v in t.data() {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Precision::F64 => {
                for &v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic").map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u8("format version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let block_len = r.u32("hyperparameter block")?;
    if block_len != HYPER_BLOCK_LEN {
        return Err(CheckpointError::Inconsistent(format!(
            "hyperparameter block has {block_len} bytes, expected {HYPER_BLOCK_LEN}"
        )));
    }
    let ctx = "hyperparameter block";
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u64(ctx)? as usize;
    }
    let dropout_embedding_hidden = r.f64(ctx)?;
    let dropout_input_output = r.f64(ctx)?;
    let precision_tag = r.u8(ctx)?;
    let precision = Precision::from_tag(precision_tag)
        .ok_or_else(|| CheckpointError::Inconsistent(format!("unknown precision tag {precision_tag}")))?;
    let seed = r.u64(ctx)?;
    let hyper = Hyperparameters {
        source_vocab_size: dims[0],
        target_vocab_size: dims[1],
        embedding_dim: dims[2],
        hidden_dim: dims[3],
        attention_dim: dims[4],
        readout_dim: dims[5],
        dropout_embedding_hidden,
        dropout_input_output,
        precision,
        seed,
    };
    hyper.validate().map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;

    let count = r.u32("tensor count")? as usize;
    let expected = Param::all();
    if count != expected.len() {
        return Err(CheckpointError::Inconsistent(format!("{count} tensors stored, model has {}", expected.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (i, param) in expected.into_iter().enumerate() {
        let header = format!("header of tensor #{i}");
        let name_len = r.u32(&header)? as usize;
        let name = String::from_utf8(r.take(name_len, &header)?.to_vec())
            .map_err(|_| CheckpointError::Inconsistent(format!("tensor #{i} name is not UTF-8")))?;
        if name != param.name() {
            return Err(CheckpointError::Inconsistent(format!("tensor #{i} is `{name}`, expected `{}`", param.name())));
        }
        let ctx = format!("tensor {name}");
        let rank = r.u8(&ctx)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64(&ctx)? as usize);
        }
        let implied = param.shape(&hyper);
        if shape != implied {
            return Err(CheckpointError::Inconsistent(format!(
                "tensor {name} has shape {shape:?}, hyperparameters imply {implied:?}"
            )));
        }
        let tag = r.u8(&ctx)?;
        if tag != precision.tag() {
            return Err(CheckpointError::Inconsistent(format!(
                "tensor {name} precision tag {tag} disagrees with hyperparameters ({precision})"
            )));
        }
        let n: usize = shape.iter().product();
        let data = match precision {
            Precision::F32 => r
                .take(n * 4, &ctx)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
            Precision::F64 => r
                .take(n * 8, &ctx)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        };
        tensors.push(Tensor::new(shape, data));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Inconsistent(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    let params = ModelParameters::from_tensors(&hyper, tensors).map_err(|e| match e {
        ModelError::ShapeInconsistency(msg) | ModelError::InvalidHyperparameter(msg) => {
            CheckpointError::Inconsistent(msg)
        }
        other => CheckpointError::Inconsistent(other.to_string()),
    })?;
    Ok(Model { hyper, params })
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    from_bytes(&bytes)
}
