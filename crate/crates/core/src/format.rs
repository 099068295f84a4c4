//! Little-endian binary containers for named tensors.
//!
//! Layout: 4-byte magic, `u32` version, `u32` length plus UTF-8 block of
//! `key=value` lines, then records until end of file. A record is
//! `name_len: u32`, UTF-8 name, `dtype: u8` (0 = f64, 1 = complex f64 pairs),
//! `ndim: u8`, `dims: u64[ndim]` and the row-major payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Storage, Tensor, C64};

pub const FORMAT_VERSION: u32 = 1;

/// Ordered `key=value` metadata.
pub type KeyValues = BTreeMap<String, String>;

/// A decoded container: metadata plus tensors in file order.
#[derive(Debug, Clone)]
pub struct Container {
    pub meta: KeyValues,
    pub tensors: Vec<(String, Tensor)>,
}

impl Container {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn encode_meta(meta: &KeyValues) -> Result<String> {
    let mut s = String::new();
    for (k, v) in meta {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Format(format!("metadata entry {k:?} cannot be encoded")));
        }
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    Ok(s)
}

fn decode_meta(s: &str) -> Result<KeyValues> {
    s.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format(format!("malformed metadata line {l:?}")))
        })
        .collect()
}

pub fn encode(magic: &[u8; 4], meta: &KeyValues, tensors: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let block = encode_meta(meta)?;
    out.extend_from_slice(&(block.len() as u32).to_le_bytes());
    out.extend_from_slice(block.as_bytes());
    for (name, t) in tensors {
        if t.rank() > u8::MAX as usize {
            return Err(Error::Format(format!("tensor {name} has too many dimensions")));
        }
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(if t.is_complex() { 1 } else { 0 });
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match t.storage() {
            Storage::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Storage::Complex(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("file truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format(format!("{what} is too large")))?;
        let raw = self.take(len, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn decode(magic: &[u8; 4], bytes: &[u8]) -> Result<Container> {
    let mut r = Reader { bytes, pos: 0 };
    let m = r.take(4, "magic")?;
    if m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    let len = r.u32("metadata length")? as usize;
    let block = std::str::from_utf8(r.take(len, "metadata")?)
        .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
    let meta = decode_meta(block)?;
    let mut tensors = Vec::new();
    while r.pos < bytes.len() {
        let nlen = r.u32("record name length")? as usize;
        let name = std::str::from_utf8(r.take(nlen, "record name")?)
            .map_err(|_| Error::Format("record name is not UTF-8".into()))?
            .to_string();
        let head = r.take(2, "record header")?;
        let (dtype, ndim) = (head[0], head[1] as usize);
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u64("record dims")? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("record {name} declares an overflowing size")))?;
        let storage = match dtype {
            0 => Storage::Real(r.f64s(count, &format!("payload of {name}"))?),
            1 => {
                let v = r.f64s(count.saturating_mul(2), &format!("payload of {name}"))?;
                Storage::Complex(v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
            }
            other => return Err(Error::Format(format!("record {name} has unknown dtype {other}"))),
        };
        let t = if dims.is_empty() {
            match storage {
                Storage::Real(v) => Tensor::scalar(v[0]),
                Storage::Complex(_) => return Err(Error::Format(format!("record {name}: complex scalar"))),
            }
        } else {
            Tensor::new(&dims, storage).map_err(|e| Error::Format(format!("record {name}: {e}")))?
        };
        tensors.push((name, t));
    }
    Ok(Container { meta, tensors })
}

pub fn write_file(path: &Path, magic: &[u8; 4], meta: &KeyValues, tensors: &[(String, Tensor)]) -> Result<()> {
    fs::write(path, encode(magic, meta, tensors)?)?;
    Ok(())
}

pub fn read_file(path: &Path, magic: &[u8; 4]) -> Result<Container> {
    decode(magic, &fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut meta = KeyValues::new();
        meta.insert("kind".into(), "darcy".into());
        let a = Tensor::from_real(&[2, 2], vec![1.5, -0.0, f64::MIN_POSITIVE, 3.0e300]).unwrap();
        let b = Tensor::from_complex(&[3], vec![C64::new(1.0, -2.0); 3]).unwrap();
        let bytes = encode(b"TEST", &meta, &[("a".into(), a.clone()), ("b".into(), b.clone())]).unwrap();
        let c = decode(b"TEST", &bytes).unwrap();
        assert_eq!(c.meta, meta);
        assert!(c.get("a").unwrap().bit_eq(&a));
        assert!(c.get("b").unwrap().bit_eq(&b));
    }

    #[test]
    fn rejects_corruption() {
        let a = Tensor::full(&[4], 1.0).unwrap();
        let bytes = encode(b"TEST", &KeyValues::new(), &[("a".into(), a)]).unwrap();
        assert!(decode(b"NOPE", &bytes).is_err());
        assert!(decode(b"TEST", &bytes[..bytes.len() - 3]).is_err());
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(decode(b"TEST", &v), Err(Error::Format(m)) if m.contains("version")));
    }
}
