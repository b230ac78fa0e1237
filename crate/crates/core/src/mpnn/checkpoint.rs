//! Model checkpoints.
//!
//! ```text
//! magic        4 bytes  "GMCM"
//! version      u32
//! config       u32 length + UTF-8 `key=value` lines
//! fingerprint  u32 length + UTF-8
//! arrays       u32 count
//! per array:   u32 name length + UTF-8 name, u32 rank, rank × u64 dims,
//!              row-major f64 data
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{ModelParams, TrainConfig};
use crate::binio::{
    get_array, get_f64s, get_str, get_u32, get_u64, put_f64s, put_str, put_u32, put_u64,
};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GMCM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
}

fn config_block(model: &ModelParams) -> String {
    let mut text = String::new();
    for (k, v) in model.config.entries() {
        text.push_str(&format!("{k}={v}\n"));
    }
    text.push_str(&format!("node_width={}\n", model.node_width));
    text.push_str(&format!("edge_width={}\n", model.edge_width));
    text
}

pub fn to_bytes(model: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_str(&mut out, &config_block(model));
    put_str(&mut out, &model.fingerprint);
    let tensors = model.tensors();
    put_u32(&mut out, tensors.len() as u32);
    for (name, t) in &tensors {
        put_str(&mut out, name);
        put_u32(&mut out, t.ndim() as u32);
        for &d in t.shape() {
            put_u64(&mut out, d as u64);
        }
        put_f64s(&mut out, t.iter());
    }
    out
}

fn parse_body(r: &mut &[u8]) -> Result<ModelParams, String> {
    let block = get_str(r)?;
    let mut config = TrainConfig::default();
    let (mut node_width, mut edge_width) = (None, None);
    for line in block.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line `{line}` lacks `=`"))?;
        match k {
            "node_width" => node_width = Some(v.parse().map_err(|_| "bad node_width")?),
            "edge_width" => edge_width = Some(v.parse().map_err(|_| "bad edge_width")?),
            _ => {
                if !config.set(k, v)? {
                    return Err(format!("unknown config key `{k}`"));
                }
            }
        }
    }
    let node_width = node_width.ok_or("config lacks node_width")?;
    let edge_width = edge_width.ok_or("config lacks edge_width")?;
    config.validate()?;
    let mut model = ModelParams::zeros(&config, node_width, edge_width);
    model.fingerprint = get_str(r)?;

    let expected: Vec<(String, Vec<usize>)> = model
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    let count = get_u32(r)? as usize;
    if count != expected.len() {
        return Err(format!("{count} arrays, expected {}", expected.len()));
    }
    for ((name, shape), mut slot) in expected.into_iter().zip(model.tensors_mut()) {
        let found = get_str(r)?;
        if found != name {
            return Err(format!("array `{found}` where `{name}` was expected"));
        }
        let rank = get_u32(r)? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(get_u64(r)? as usize);
        }
        if dims != shape {
            return Err(format!(
                "array `{name}` has shape {dims:?}, expected {shape:?}"
            ));
        }
        let data = get_f64s(r, slot.len())?;
        for (dst, src) in slot.iter_mut().zip(data) {
            *dst = src;
        }
    }
    if !r.is_empty() {
        return Err(format!("{} trailing bytes", r.len()));
    }
    Ok(model)
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams, CheckpointError> {
    let mut r = bytes;
    let magic: [u8; 4] = get_array(&mut r).map_err(CheckpointError::CorruptCheckpoint)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::CorruptCheckpoint("bad magic".into()));
    }
    let version = get_u32(&mut r).map_err(CheckpointError::CorruptCheckpoint)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    parse_body(&mut r).map_err(CheckpointError::CorruptCheckpoint)
}

pub fn save_checkpoint(model: &ModelParams, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, CheckpointError> {
    from_bytes(&fs::read(path)?)
}
