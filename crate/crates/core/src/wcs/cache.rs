//! Binary feature cache.
//!
//! ```text
//! magic        4 bytes  "GMCW"
//! version      u32
//! fingerprint  u32 length + UTF-8
//! records      u64
//! per record:  u32 id length + UTF-8 id, u32 rows, u32 cols,
//!              rows * cols f64, row-major
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::binio::{
    get_array, get_f64s, get_str, get_u32, get_u64, put_f64s, put_str, put_u32, put_u64,
};

pub const CACHE_MAGIC: &[u8; 4] = b"GMCW";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt feature cache: {0}")]
    Corrupt(String),
    #[error("feature cache version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("feature cache fingerprint `{found}` does not match `{expected}`")]
    FingerprintMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub fingerprint: String,
    pub entries: Vec<(String, Array2<f64>)>,
}

impl FeatureCache {
    pub fn get(&self, id: &str) -> Option<&Array2<f64>> {
        self.entries.iter().find(|(k, _)| k == id).map(|(_, m)| m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        put_u32(&mut out, CACHE_VERSION);
        put_str(&mut out, &self.fingerprint);
        put_u64(&mut out, self.entries.len() as u64);
        for (id, m) in &self.entries {
            put_str(&mut out, id);
            put_u32(&mut out, m.nrows() as u32);
            put_u32(&mut out, m.ncols() as u32);
            put_f64s(&mut out, m.iter());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CacheError> {
        let mut r = bytes;
        let magic: [u8; 4] = get_array(&mut r).map_err(CacheError::Corrupt)?;
        if &magic != CACHE_MAGIC {
            return Err(CacheError::Corrupt("bad magic".into()));
        }
        let version = get_u32(&mut r).map_err(CacheError::Corrupt)?;
        if version != CACHE_VERSION {
            return Err(CacheError::VersionMismatch {
                found: version,
                expected: CACHE_VERSION,
            });
        }
        Self::read_body(&mut r).map_err(CacheError::Corrupt)
    }

    fn read_body(r: &mut &[u8]) -> Result<Self, String> {
        let fingerprint = get_str(r)?;
        let count = get_u64(r)?;
        let mut entries = Vec::new();
        for _ in 0..count {
            let id = get_str(r)?;
            let rows = get_u32(r)? as usize;
            let cols = get_u32(r)? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| format!("record `{id}` has overflowing shape"))?;
            let data = get_f64s(r, len).map_err(|e| format!("record `{id}`: {e}"))?;
            let m = Array2::from_shape_vec((rows, cols), data).map_err(|e| e.to_string())?;
            entries.push((id, m));
        }
        if !r.is_empty() {
            return Err(format!("{} trailing bytes", r.len()));
        }
        Ok(FeatureCache {
            fingerprint,
            entries,
        })
    }
}

pub fn write_cache(path: &Path, cache: &FeatureCache) -> Result<(), CacheError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&cache.to_bytes())?;
    Ok(())
}

/// Reads a cache; with `expected` set, a different fingerprint is an error.
pub fn read_cache(path: &Path, expected: Option<&str>) -> Result<FeatureCache, CacheError> {
    let cache = FeatureCache::from_bytes(&fs::read(path)?)?;
    if let Some(expected) = expected {
        if cache.fingerprint != expected {
            return Err(CacheError::FingerprintMismatch {
                expected: expected.to_string(),
                found: cache.fingerprint,
            });
        }
    }
    Ok(cache)
}
