//! Codebook checkpoint container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! offset  size        field
//! 0       8           magic  b"SIDCBOOK"
//! 8       4           format_version (u32, currently 1)
//! 12      4           L, levels (u32)
//! 16      4           K, codebook size (u32)
//! 20      4           d, dimension (u32)
//! 24      8           seed (u64)
//! 32      8*L         fit_stats, per-level MSE (f64)
//! 32+8L   8*L*K*d     centroids, level-major then row-major (f64)
//! ```
//!
//! The file ends exactly after the centroid payload.

use std::io::{Read, Write};
use std::path::Path;

use super::{CodebookStack, QuantizerError};
use crate::linalg::Matrix;

pub const CODEBOOK_MAGIC: &[u8; 8] = b"SIDCBOOK";
pub const CODEBOOK_FORMAT_VERSION: u32 = 1;

fn to_u32(value: usize, what: &str) -> Result<u32, QuantizerError> {
    u32::try_from(value).map_err(|_| QuantizerError::Format(format!("{what} {value} exceeds u32")))
}

pub fn encode_codebook(stack: &CodebookStack) -> Result<Vec<u8>, QuantizerError> {
    let mut out = Vec::with_capacity(32 + 8 * stack.levels * (1 + stack.codebook_size * stack.dim));
    out.extend_from_slice(CODEBOOK_MAGIC);
    out.extend_from_slice(&CODEBOOK_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(stack.levels, "levels")?.to_le_bytes());
    out.extend_from_slice(&to_u32(stack.codebook_size, "codebook size")?.to_le_bytes());
    out.extend_from_slice(&to_u32(stack.dim, "dim")?.to_le_bytes());
    out.extend_from_slice(&stack.seed.to_le_bytes());
    for s in &stack.fit_stats {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for level in &stack.centroids {
        for x in level.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], QuantizerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            QuantizerError::Format(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, QuantizerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, QuantizerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, QuantizerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_codebook(bytes: &[u8]) -> Result<CodebookStack, QuantizerError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(8)? != CODEBOOK_MAGIC {
        return Err(QuantizerError::Format("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CODEBOOK_FORMAT_VERSION {
        return Err(QuantizerError::Format(format!("unsupported format version {version}")));
    }
    let levels = cur.u32()? as usize;
    let k = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let seed = cur.u64()?;
    let expected = levels
        .checked_mul(k)
        .and_then(|x| x.checked_mul(dim))
        .and_then(|x| x.checked_add(levels))
        .and_then(|x| x.checked_mul(8))
        .and_then(|x| x.checked_add(32));
    if expected != Some(bytes.len()) {
        return Err(QuantizerError::Format(format!(
            "header declares L={levels} K={k} d={dim} but file has {} bytes",
            bytes.len()
        )));
    }
    let fit_stats = (0..levels).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
    let mut centroids = Vec::with_capacity(levels);
    for _ in 0..levels {
        let data = (0..k * dim).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        centroids.push(Matrix::from_vec(k, dim, data));
    }
    CodebookStack::from_parts(centroids, fit_stats, seed)
}

pub fn write_codebook(path: &Path, stack: &CodebookStack) -> Result<(), QuantizerError> {
    let bytes = encode_codebook(stack)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_codebook(path: &Path) -> Result<CodebookStack, QuantizerError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_codebook(&bytes)
}

/// Human-readable export; not read back by the crate.
pub fn write_codebook_json(path: &Path, stack: &CodebookStack) -> Result<(), QuantizerError> {
    let doc = serde_json::json!({
        "format_version": CODEBOOK_FORMAT_VERSION,
        "levels": stack.levels,
        "codebook_size": stack.codebook_size,
        "dim": stack.dim,
        "seed": stack.seed,
        "fit_stats": stack.fit_stats,
        "centroids": stack.centroids.iter()
            .map(|m| m.iter_rows().map(<[f64]>::to_vec).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| QuantizerError::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
