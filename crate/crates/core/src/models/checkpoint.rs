//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic        "CONETCKPT"            9 bytes
//! version      u32
//! architecture u8                     0 mlp, 1 mlp++, 2 csn, 3 conet
//! d            u64
//! num_widths   u64, then each width as u64
//! lambda       f64
//! alpha_s      f64
//! alpha_d      f64
//! share_users  u8
//! num_users    u64
//! num_target   u64
//! num_source   u64
//! split        32 bytes               sha256 fingerprint of the split
//! num_blocks   u64
//! per block    rows u64, cols u64, rows*cols f64 (row-major)
//! ```
//!
//! Blocks follow [`Model::blocks`] order.

use std::fs;
use std::path::Path;

use super::config::{Architecture, ModelConfig, ModelShape};
use super::params::Model;
use crate::data::hex;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"CONETCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A model plus the fingerprint of the split it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Hex sha256 of the training split (all zeros when unknown).
    pub split_fingerprint: String,
}

pub fn encode_checkpoint(model: &Model, split_fingerprint: &str) -> Result<Vec<u8>> {
    let fp = decode_hex32(split_fingerprint)?;
    let c = model.config();
    let s = model.shape();
    let mut out = Vec::with_capacity(128 + 8 * model.num_parameters());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(c.architecture.tag());
    put_u64(&mut out, c.embedding_dim);
    put_u64(&mut out, c.hidden_widths.len());
    for &w in &c.hidden_widths {
        put_u64(&mut out, w);
    }
    out.extend_from_slice(&c.lasso_lambda.to_le_bytes());
    out.extend_from_slice(&c.csn_alpha_init.0.to_le_bytes());
    out.extend_from_slice(&c.csn_alpha_init.1.to_le_bytes());
    out.push(u8::from(c.share_user_embedding));
    put_u64(&mut out, s.num_users);
    put_u64(&mut out, s.num_target_items);
    put_u64(&mut out, s.num_source_items);
    out.extend_from_slice(&fp);
    let blocks = model.blocks();
    put_u64(&mut out, blocks.len());
    for (info, data) in blocks {
        put_u64(&mut out, info.rows);
        put_u64(&mut out, info.cols);
        for x in data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(9)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let tag = r.take(1)?[0];
    let architecture =
        Architecture::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown architecture tag {tag}")))?;
    let embedding_dim = r.len()?;
    let n_widths = r.len()?;
    let hidden_widths = (0..n_widths).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
    let lasso_lambda = r.f64()?;
    let csn_alpha_init = (r.f64()?, r.f64()?);
    let share_user_embedding = r.take(1)?[0] != 0;
    let config = ModelConfig {
        architecture,
        embedding_dim,
        hidden_widths,
        csn_alpha_init,
        lasso_lambda,
        share_user_embedding,
    };
    let shape = ModelShape {
        num_users: r.len()?,
        num_target_items: r.len()?,
        num_source_items: r.len()?,
    };
    let split_fingerprint = hex(r.take(32)?);
    let mut model =
        Model::zeros(config, shape).map_err(|e| Error::Checkpoint(format!("invalid stored configuration: {e}")))?;
    let n_blocks = r.len()?;
    {
        let mut blocks = model.blocks_mut();
        if n_blocks != blocks.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter blocks, found {n_blocks}",
                blocks.len()
            )));
        }
        for (info, data) in blocks.iter_mut() {
            let (rows, cols) = (r.len()?, r.len()?);
            if (rows, cols) != (info.rows, info.cols) {
                return Err(Error::Checkpoint(format!(
                    "block {} has shape {rows}x{cols}, expected {}x{}",
                    info.name, info.rows, info.cols
                )));
            }
            for x in data.iter_mut() {
                *x = r.f64()?;
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after the last block".into()));
    }
    Ok(Checkpoint {
        model,
        split_fingerprint,
    })
}

pub fn save_checkpoint(path: &Path, model: &Model, split_fingerprint: &str) -> Result<()> {
    fs::write(path, encode_checkpoint(model, split_fingerprint)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}

fn decode_hex32(s: &str) -> Result<[u8; 32]> {
    let mut out = [0u8; 32];
    if s.is_empty() {
        return Ok(out);
    }
    if s.len() != 64 || !s.is_ascii() {
        return Err(Error::Checkpoint(format!("split fingerprint must be 64 hex digits, got {s:?}")));
    }
    for (k, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&s[2 * k..2 * k + 2], 16)
            .map_err(|_| Error::Checkpoint(format!("bad hex in split fingerprint {s:?}")))?;
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("size {v} does not fit in memory")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
