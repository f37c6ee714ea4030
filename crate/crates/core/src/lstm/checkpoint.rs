//! `LSTM` checkpoint container.
//!
//! ```text
//! "LSTM" | version u16
//! config: seq_len u32 | input_dim u32 | hidden_dim u32 | num_layers u32
//!         dropout_rate f64 | output_dim u32 | learning_rate f64
//!         batch_size u32 | seed u64 | trained_epochs u32
//! tensors: count u32, then per tensor: rank u32 | dims u32[rank] | f32 data
//! crc32 u32 over every preceding byte
//! ```
//!
//! Parameters are stored as f32. Models built by this crate keep their
//! parameters on the f32 grid, so a round trip is exact.

use std::fs;
use std::path::Path;

use super::params::ParamLayout;
use super::{LstmModel, ModelConfig, ModelError};
use crate::binio::{ByteReader, ByteWriter};

const MAGIC: &[u8; 4] = b"LSTM";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint(model: &LstmModel) -> Vec<u8> {
    let c = &model.config;
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u16(CHECKPOINT_VERSION);
    w.u32(c.seq_len as u32);
    w.u32(c.input_dim as u32);
    w.u32(c.hidden_dim as u32);
    w.u32(c.num_layers as u32);
    w.f64(c.dropout_rate);
    w.u32(c.output_dim as u32);
    w.f64(c.learning_rate);
    w.u32(c.batch_size as u32);
    w.u64(c.seed);
    w.u32(model.trained_epochs);

    let tensors = model.layout().tensors();
    w.u32(tensors.len() as u32);
    for (shape, offset) in &tensors {
        w.u32(shape.len() as u32);
        for &d in shape {
            w.u32(d as u32);
        }
        let len: usize = shape.iter().product();
        for &p in &model.params()[*offset..offset + len] {
            w.f32(p as f32);
        }
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    w.buf
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<LstmModel, ModelError> {
    let corrupt = |msg: &str| ModelError::CorruptCheckpoint(msg.to_string());
    if bytes.len() < MAGIC.len() + 2 || &bytes[..4] != MAGIC {
        return Err(corrupt("missing LSTM magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    if bytes.len() < 10 {
        return Err(corrupt("truncated checkpoint"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }

    let truncated = || corrupt("truncated checkpoint");
    let mut r = ByteReader::new(&body[6..]);
    let mut dim = || r.u32().map(|v| v as usize);
    let seq_len = dim().ok_or_else(truncated)?;
    let input_dim = dim().ok_or_else(truncated)?;
    let hidden_dim = dim().ok_or_else(truncated)?;
    let num_layers = dim().ok_or_else(truncated)?;
    let dropout_rate = r.f64().ok_or_else(truncated)?;
    let output_dim = r.u32().ok_or_else(truncated)? as usize;
    let learning_rate = r.f64().ok_or_else(truncated)?;
    let batch_size = r.u32().ok_or_else(truncated)? as usize;
    let seed = r.u64().ok_or_else(truncated)?;
    let trained_epochs = r.u32().ok_or_else(truncated)?;
    let config = ModelConfig { seq_len, input_dim, hidden_dim, num_layers, dropout_rate, output_dim, learning_rate, batch_size, seed };
    config.validate().map_err(|e| corrupt(&e.to_string()))?;

    let mut model = LstmModel::zeros(config)?;
    model.trained_epochs = trained_epochs;
    let expected = ParamLayout::new(&config).tensors();
    let count = r.u32().ok_or_else(truncated)? as usize;
    if count != expected.len() {
        return Err(corrupt("unexpected tensor count"));
    }
    for (shape, offset) in &expected {
        let rank = r.u32().ok_or_else(truncated)? as usize;
        if rank != shape.len() {
            return Err(corrupt("tensor rank mismatch"));
        }
        for &d in shape {
            if r.u32().ok_or_else(truncated)? as usize != d {
                return Err(corrupt("tensor shape mismatch"));
            }
        }
        let len: usize = shape.iter().product();
        if r.remaining() < len * 4 {
            return Err(truncated());
        }
        for p in &mut model.params_mut()[*offset..offset + len] {
            *p = f64::from(r.f32().ok_or_else(truncated)?);
        }
    }
    if r.remaining() != 0 {
        return Err(corrupt("trailing bytes after tensors"));
    }
    if !model.is_finite() {
        return Err(corrupt("non-finite parameter"));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &LstmModel, path: &Path) -> Result<(), ModelError> {
    crate::write_atomic(path, &write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LstmModel, ModelError> {
    read_checkpoint(&fs::read(path)?)
}
