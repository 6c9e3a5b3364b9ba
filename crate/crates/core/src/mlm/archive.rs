//! Binary tensor archive used for the bundled micro-backend weights.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic          4 bytes  "TSMW"
//! version        u32      1
//! config_len     u32      byte length of the JSON encoder config that follows
//! config         bytes    UTF-8 JSON (EncoderConfig)
//! tensor_count   u32
//! repeated tensor_count times, sorted by name:
//!   name_len     u32
//!   name         bytes    UTF-8 checkpoint name, e.g. "bert.embeddings.word_embeddings.weight"
//!   ndim         u32
//!   dims         u32 x ndim
//!   data         f32 x product(dims), little-endian, row-major
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};

use super::encoder::EncoderConfig;

pub const MAGIC: &[u8; 4] = b"TSMW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub config: EncoderConfig,
    pub tensors: BTreeMap<String, ArchiveTensor>,
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v =
        u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

impl Archive {
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u32(&mut w, VERSION as usize)?;
        let config = serde_json::to_vec(&self.config)?;
        put_u32(&mut w, config.len())?;
        w.write_all(&config)?;
        put_u32(&mut w, self.tensors.len())?;
        for (name, tensor) in &self.tensors {
            let expected: usize = tensor.shape.iter().product();
            if expected != tensor.data.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: shape {:?} holds {expected} values, got {}",
                    tensor.shape,
                    tensor.data.len()
                )));
            }
            put_u32(&mut w, name.len())?;
            w.write_all(name.as_bytes())?;
            put_u32(&mut w, tensor.shape.len())?;
            for &d in &tensor.shape {
                put_u32(&mut w, d)?;
            }
            for &x in &tensor.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    pub fn read(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.error("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error(&format!("unsupported version {version}")));
        }
        let config_len = r.u32()? as usize;
        let config: EncoderConfig = serde_json::from_slice(r.take(config_len)?)?;
        let count = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.error("tensor name is not UTF-8"))?
                .to_string();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let raw = r.take(numel * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.insert(name, ArchiveTensor { shape, data });
        }
        if r.pos != bytes.len() {
            return Err(r.error("trailing bytes"));
        }
        Ok(Self { config, tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, message: &str) -> Error {
        Error::BackendUnavailable(format!("weight archive offset {}: {message}", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error("truncated"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
