//! Little-endian binary containers shared by every on-disk artifact.
//!
//! A file starts with an 8-byte magic, a kind tag, a format version and a
//! header of key/value strings, followed by a kind-specific payload.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use uisum_core::autograd::ParamStore;
use uisum_core::tensor::Tensor;

use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"UISUMBIN";

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(kind: &str, version: u32, header: &[(String, String)]) -> Self {
        let mut e = Encoder::default();
        e.buf.extend_from_slice(MAGIC);
        e.str(kind);
        e.u32(version);
        e.u64(header.len() as u64);
        for (k, v) in header {
            e.str(k);
            e.str(v);
        }
        e
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn f32s(&mut self, v: &[f32]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    pub fn opt_str(&mut self, s: Option<&str>) {
        self.bool(s.is_some());
        if let Some(s) = s {
            self.str(s);
        }
    }

    /// Named tensors with their trainable flag.
    pub fn params(&mut self, store: &ParamStore) {
        self.u64(store.len() as u64);
        for (_, p) in store.iter() {
            self.str(&p.name);
            self.bool(p.trainable);
            self.u64(p.value.shape().len() as u64);
            for &d in p.value.shape() {
                self.u64(d as u64);
            }
            self.f64s(p.value.data());
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.buf)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    {
        let f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
    pub version: u32,
    pub header: Vec<(String, String)>,
}

impl<'a> Decoder<'a> {
    /// Checks the magic and kind, and reads the header.
    pub fn open(buf: &'a [u8], path: &'a Path, kind: &str, max_version: u32) -> Result<Self> {
        let mut d = Decoder {
            buf,
            pos: 0,
            path,
            version: 0,
            header: Vec::new(),
        };
        if buf.len() < MAGIC.len() || &buf[..MAGIC.len()] != MAGIC {
            return Err(Error::format(path, "not a uisum binary file"));
        }
        d.pos = MAGIC.len();
        let found = d.str()?;
        if found != kind {
            return Err(Error::format(path, format!("expected a {kind} file, found {found}")));
        }
        d.version = d.u32()?;
        if d.version == 0 || d.version > max_version {
            return Err(Error::format(
                path,
                format!("unsupported {kind} version {} (max {max_version})", d.version),
            ));
        }
        let n = d.len()?;
        for _ in 0..n {
            let k = d.str()?;
            let v = d.str()?;
            d.header.push((k, v));
        }
        Ok(d)
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn err(&self, what: &str) -> Error {
        Error::format(self.path, format!("truncated or corrupt data ({what} at byte {})", self.pos))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1, "u8")?[0])
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(self.err("bool")),
        }
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, "u32")?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, "u64")?.try_into().unwrap()))
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, "i32")?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, "f64")?.try_into().unwrap()))
    }

    /// A length prefix, checked against the remaining bytes.
    pub fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > (self.buf.len() - self.pos) as u64 * 8 + 1024 {
            return Err(self.err("length"));
        }
        Ok(n as usize)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n, "bytes")
    }

    pub fn str(&mut self) -> Result<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| self.err("utf-8 string"))
    }

    pub fn opt_str(&mut self) -> Result<Option<String>> {
        Ok(if self.bool()? { Some(self.str()?) } else { None })
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        let raw = self.take(n * 8, "f64 array")?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.len()?;
        let raw = self.take(n * 4, "f32 array")?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn params(&mut self) -> Result<ParamStore> {
        let n = self.len()?;
        let mut store = ParamStore::new();
        for _ in 0..n {
            let name = self.str()?;
            let trainable = self.bool()?;
            let rank = self.len()?;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(self.u64()? as usize);
            }
            let data = self.f64s()?;
            if shape.iter().product::<usize>() != data.len() {
                return Err(Error::format(
                    self.path,
                    format!("tensor {name}: shape {shape:?} does not match {} values", data.len()),
                ));
            }
            let t = Tensor::from_vec(&shape, data);
            if trainable {
                store.add(name, t);
            } else {
                store.add_buffer(name, t);
            }
        }
        Ok(store)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.path,
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
