//! Named-tensor container file. Wire layout, all little-endian:
//!   magic "EPCV" | version u16 | entry count u32
//!   per entry: name length u16 | name UTF-8 | rank u8 | extents u64 each
//!              | dtype tag u8 (0 = f64) | payload (raw f64 LE)
//! Writing the same entries twice yields byte-identical files.

use std::io::{Read, Write};
use std::path::Path;

use crate::{EngineError, Result, Tensor};

pub const MAGIC: [u8; 4] = *b"EPCV";
pub const VERSION: u16 = 1;
const DTYPE_F64: u8 = 0;

pub fn to_bytes(entries: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        let nb = name.as_bytes();
        if nb.len() > u16::MAX as usize {
            return Err(EngineError::invalid("container", format!("name too long: {name}")));
        }
        if t.shape().len() > u8::MAX as usize {
            return Err(EngineError::invalid("container", format!("rank too large for {name}")));
        }
        out.extend_from_slice(&(nb.len() as u16).to_le_bytes());
        out.extend_from_slice(nb);
        out.push(t.shape().len() as u8);
        for d in t.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        out.push(DTYPE_F64);
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Vec<(String, Tensor)>> {
    let bad = |detail: String| EngineError::Container { path: origin.to_string(), detail };
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(bad(format!("truncated at offset {}", *pos)));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };

    let magic = take(&mut pos, 4)?;
    if magic != MAGIC {
        return Err(bad(format!("bad magic {:?}", magic)));
    }
    let version = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut pos, nlen)?)
            .map_err(|_| bad("entry name is not UTF-8".to_string()))?
            .to_string();
        let rank = take(&mut pos, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize);
        }
        let dtype = take(&mut pos, 1)?[0];
        if dtype != DTYPE_F64 {
            return Err(bad(format!("entry {name}: unsupported dtype tag {dtype}")));
        }
        let n: usize = shape.iter().product();
        let raw = take(&mut pos, n * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.push((name, Tensor::new(shape, data)?));
    }
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(entries)
}

pub fn write(path: &Path, entries: &[(String, Tensor)]) -> Result<()> {
    let bytes = to_bytes(entries)?;
    let mut f = std::fs::File::create(path)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    f.write_all(&bytes)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })
}

pub fn read(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut f = std::fs::File::open(path)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    from_bytes(&bytes, &path.display().to_string())
}

/// Convenience for single-value metadata entries.
pub fn scalar_entry(name: &str, v: f64) -> (String, Tensor) {
    (name.to_string(), Tensor::scalar(v))
}

pub fn get<'a>(entries: &'a [(String, Tensor)], name: &str) -> Result<&'a Tensor> {
    entries
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| EngineError::Container {
            path: String::new(),
            detail: format!("missing entry {name}"),
        })
}

pub fn get_scalar(entries: &[(String, Tensor)], name: &str) -> Result<f64> {
    get(entries, name)?.item()
}
