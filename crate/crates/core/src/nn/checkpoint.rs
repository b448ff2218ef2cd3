//! Versioned binary parameter files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "FTNN" | version u32 | shells u32 | element bytes u8 (4 or 8)
//! patch u32 | conv1 kernel u32, filters u32 | dense count u32 | (kernel u32, filters u32)*
//! conv6 kernel u32, filters u32 | pool kernel u32 | channel window u32 | pooled u32 | branch out u32
//! tensor count u32 | per tensor: name len u16, utf-8 name, ndim u8, dims u32*, row-major payload
//! ```

use std::path::Path;

use super::arch::{Architecture, ConvSpec};
use super::network::Network;
use super::real::Real;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FTNN";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

/// Serializes `net`; element width follows `T`.
pub fn to_bytes<T: Real>(net: &Network<T>) -> Vec<u8> {
    let width = std::mem::size_of::<T>();
    let arch = net.architecture();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, arch.shells);
    out.push(width as u8);
    put_u32(&mut out, arch.patch);
    put_u32(&mut out, arch.conv1.kernel);
    put_u32(&mut out, arch.conv1.filters);
    put_u32(&mut out, arch.dense.len());
    for d in &arch.dense {
        put_u32(&mut out, d.kernel);
        put_u32(&mut out, d.filters);
    }
    put_u32(&mut out, arch.conv6.kernel);
    put_u32(&mut out, arch.conv6.filters);
    put_u32(&mut out, arch.pool_kernel);
    put_u32(&mut out, arch.channel_window);
    put_u32(&mut out, arch.pooled);
    put_u32(&mut out, arch.branch_out);
    let params = net.params();
    put_u32(&mut out, params.len());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.shape.len() as u8);
        for &d in &p.shape {
            put_u32(&mut out, d);
        }
        for v in p.data {
            if width == 4 {
                out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
            } else {
                out.extend_from_slice(&v.to_f64().to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Parse(format!(
                "checkpoint truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn spec(&mut self) -> Result<ConvSpec> {
        Ok(ConvSpec::new(self.u32()?, self.u32()?))
    }
}

/// Parses a checkpoint, converting the stored element width to `T`.
pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Parse("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let shells = r.u32()?;
    let width = r.u8()? as usize;
    if width != 4 && width != 8 {
        return Err(Error::Parse(format!("unsupported element width {width}")));
    }
    let patch = r.u32()?;
    let conv1 = r.spec()?;
    let n_dense = r.u32()?;
    if n_dense > 64 {
        return Err(Error::Parse(format!("implausible dense layer count {n_dense}")));
    }
    let dense = (0..n_dense).map(|_| r.spec()).collect::<Result<Vec<_>>>()?;
    let arch = Architecture {
        patch,
        shells,
        conv1,
        dense,
        conv6: r.spec()?,
        pool_kernel: r.u32()?,
        channel_window: r.u32()?,
        pooled: r.u32()?,
        branch_out: r.u32()?,
    };
    let mut net = Network::<T>::zeros(&arch)?;
    let expected: Vec<(String, Vec<usize>)> =
        net.params().into_iter().map(|p| (p.name, p.shape)).collect();
    let count = r.u32()?;
    if count != expected.len() {
        return Err(Error::Parse(format!(
            "checkpoint has {count} tensors, architecture needs {}",
            expected.len()
        )));
    }
    for ((name, shape), dst) in expected.iter().zip(net.params_mut()) {
        let len = r.u16()? as usize;
        let got = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Parse("tensor name is not utf-8".into()))?;
        if got != name {
            return Err(Error::Parse(format!("expected tensor {name}, found {got}")));
        }
        let ndim = r.u8()? as usize;
        let dims = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(Error::Parse(format!("tensor {name} has shape {dims:?}, expected {shape:?}")));
        }
        let payload = r.take(dst.len() * width)?;
        for (v, chunk) in dst.iter_mut().zip(payload.chunks_exact(width)) {
            *v = if width == 4 {
                T::from_f64(f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64)
            } else {
                T::from_f64(f64::from_le_bytes(chunk.try_into().expect("8 bytes")))
            };
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    Ok(net)
}

pub fn save<T: Real>(path: &Path, net: &Network<T>) -> Result<()> {
    std::fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: &Path) -> Result<Network<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
