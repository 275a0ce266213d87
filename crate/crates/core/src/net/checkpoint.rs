//! Little-endian parameter dump:
//!
//! ```text
//! "UCGK" u32 version u32 count
//! count × { u32 name_len, name bytes, u32 rank, rank × u32 dim, f32 × numel }
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::layers::Module;
use crate::error::{Error, Result};
use crate::tensor::{Element, Shape};

pub const MAGIC: &[u8; 4] = b"UCGK";
pub const VERSION: u32 = 1;

/// One named tensor as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Shape,
    pub data: Vec<f32>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode<T: Element, M: Module<T> + ?Sized>(module: &M) -> Vec<u8> {
    let params = module.parameters();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, params.len() as u32);
    for p in params {
        put_u32(&mut out, p.name.len() as u32);
        out.extend_from_slice(p.name.as_bytes());
        let dims = p.tensor.shape().0;
        put_u32(&mut out, dims.len() as u32);
        for d in dims {
            put_u32(&mut out, d as u32);
        }
        for v in p.tensor.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Entry>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = c.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let rank = c.u32()? as usize;
        if rank != 4 {
            return Err(Error::Format(format!("`{name}` has rank {rank}, expected 4")));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = c.u32()? as usize;
        }
        let shape = Shape(dims);
        let raw = c.take(shape.numel().checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        entries.push(Entry { name, shape, data });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint", bytes.len() - c.pos)));
    }
    Ok(entries)
}

/// Overwrite every parameter of `module` from `entries`, matching by name and shape.
pub fn apply<T: Element, M: Module<T> + ?Sized>(module: &mut M, entries: &[Entry]) -> Result<()> {
    let params = module.parameters_mut();
    if params.len() != entries.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, model expects {}",
            entries.len(),
            params.len()
        )));
    }
    for (p, e) in params.into_iter().zip(entries) {
        if p.name != e.name || p.tensor.shape() != e.shape {
            return Err(Error::Format(format!(
                "checkpoint tensor `{}` {:?} does not match model tensor `{}` {:?}",
                e.name,
                e.shape,
                p.name,
                p.tensor.shape()
            )));
        }
        p.set(e.data.iter().map(|&v| T::lit(v as f64)).collect())?;
    }
    Ok(())
}

pub fn save<T: Element, M: Module<T> + ?Sized>(module: &M, path: &Path) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode(module))?;
    Ok(())
}

pub fn load_entries(path: &Path) -> Result<Vec<Entry>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
