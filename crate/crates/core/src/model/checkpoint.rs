//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "FDAN" | u16 version = 1 | u32 len | len bytes UTF-8 JSON config
//! then per parameter, in store order:
//!   u16 name len | name | u8 rank | rank × u32 dims | f32 values
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

use super::{build_fdan, FdanConfig, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FDAN";
pub const CHECKPOINT_VERSION: u16 = 1;

pub(crate) struct Entry<'a> {
    pub name: &'a str,
    pub shape: &'a [usize],
    pub data: &'a [f32],
}

pub(crate) fn write_container<'a>(
    magic: &[u8; 4],
    json: &str,
    entries: impl IntoIterator<Item = Entry<'a>>,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    for e in entries {
        let name_len = u16::try_from(e.name.len())
            .map_err(|_| Error::Format(format!("parameter name too long: {}", e.name)))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.push(e.shape.len() as u8);
        for &d in e.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.reserve(e.data.len() * 4);
        for v in e.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) struct ContainerReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ContainerReader<'a> {
    fn take(&mut self, n: usize, what: impl Fn() -> String) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("truncated file while reading {}", what())));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: impl Fn() -> String) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: impl Fn() -> String) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    /// Reads the next entry, which must be named `expected`.
    pub fn entry(&mut self, expected: &str) -> Result<(Vec<usize>, Vec<f32>)> {
        let ctx = || format!("parameter '{expected}'");
        let len = self.u16(ctx)? as usize;
        let name = std::str::from_utf8(self.take(len, ctx)?)
            .map_err(|_| Error::Format(format!("non UTF-8 name where '{expected}' was expected")))?;
        if name != expected {
            return Err(Error::Format(format!(
                "found parameter '{name}' where '{expected}' was expected"
            )));
        }
        let rank = self.take(1, ctx)?[0] as usize;
        let shape = (0..rank)
            .map(|_| self.u32(ctx).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let raw = self
            .take(count * 4, || format!("truncated tensor data of parameter '{expected}'"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((shape, data))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last parameter",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Validates magic and version and returns the JSON header.
pub(crate) fn read_container<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(String, ContainerReader<'a>)> {
    let mut r = ContainerReader { bytes, pos: 0 };
    let m = r.take(4, || "magic".into())?;
    if m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u16(|| "version".into())?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let len = r.u32(|| "header length".into())? as usize;
    let json = std::str::from_utf8(r.take(len, || "config header".into())?)
        .map_err(|_| Error::Format("config header is not UTF-8".into()))?
        .to_owned();
    Ok((json, r))
}

pub fn encode_checkpoint(params: &ParamStore<f32>, config: &FdanConfig) -> Result<Vec<u8>> {
    let json = serde_json::to_string(config).map_err(|e| Error::Internal(e.to_string()))?;
    write_container(
        CHECKPOINT_MAGIC,
        &json,
        params.iter().map(|e| Entry {
            name: &e.name,
            shape: &e.shape,
            data: e.value.data(),
        }),
    )
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ParamStore<f32>, FdanConfig)> {
    let (json, mut r) = read_container(bytes, CHECKPOINT_MAGIC)?;
    let config: FdanConfig = serde_json::from_str(&json)
        .map_err(|e| Error::Format(format!("config header: {e}")))?;
    let (_, mut params) = build_fdan(&config)?;
    for e in params.iter_mut() {
        let (shape, data) = r.entry(&e.name)?;
        if shape != e.shape {
            return Err(Error::Format(format!(
                "parameter '{}' has shape {:?}, model expects {:?}",
                e.name, shape, e.shape
            )));
        }
        e.value = Tensor::new(e.value.dims(), data)?;
    }
    r.finish()?;
    Ok((params, config))
}

pub fn save_checkpoint(params: &ParamStore<f32>, config: &FdanConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params, config)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ParamStore<f32>, FdanConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint that must match the architecture of `expected`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, expected: &FdanConfig) -> Result<ParamStore<f32>> {
    let (params, found) = load_checkpoint(path)?;
    if !found.same_architecture(expected) {
        return Err(Error::Config(format!(
            "checkpoint architecture {found:?} does not match model {expected:?}"
        )));
    }
    Ok(params)
}
