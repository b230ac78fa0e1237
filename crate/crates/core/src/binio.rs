//! Little-endian primitives shared by the binary file formats.

use std::io::Read;

/// Reader errors carry only a message; callers wrap it in their own type.
pub(crate) type ReadResult<T> = Result<T, String>;

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub(crate) fn put_f64s<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn take(r: &mut &[u8], buf: &mut [u8]) -> ReadResult<()> {
    r.read_exact(buf)
        .map_err(|_| "unexpected end of file".to_string())
}

pub(crate) fn get_array<const N: usize>(r: &mut &[u8]) -> ReadResult<[u8; N]> {
    let mut buf = [0u8; N];
    take(r, &mut buf)?;
    Ok(buf)
}

pub(crate) fn get_u32(r: &mut &[u8]) -> ReadResult<u32> {
    Ok(u32::from_le_bytes(get_array(r)?))
}

pub(crate) fn get_u64(r: &mut &[u8]) -> ReadResult<u64> {
    Ok(u64::from_le_bytes(get_array(r)?))
}

pub(crate) fn get_str(r: &mut &[u8]) -> ReadResult<String> {
    let len = get_u32(r)? as usize;
    if len > r.len() {
        return Err("string runs past end of file".into());
    }
    let mut buf = vec![0u8; len];
    take(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| "invalid UTF-8".into())
}

/// Reads `count` f64 values, refusing counts the remaining bytes cannot hold.
pub(crate) fn get_f64s(r: &mut &[u8], count: usize) -> ReadResult<Vec<f64>> {
    if count.saturating_mul(8) > r.len() {
        return Err("array runs past end of file".into());
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(f64::from_le_bytes(get_array(r)?));
    }
    Ok(out)
}
