//! SRWB weight bundles.
//!
//! Layout: `SRWB`, version `u16` (1), entry count `u32`; then per entry a
//! `u16` name length, the UTF-8 name, `u8` ndim, `ndim` × `u32` dims, and the
//! `f32` payload. Little-endian throughout.

use std::fs;
use std::path::Path;

use super::Tensor;
use crate::binio::{checked_product, put_f32s, ByteReader};
use crate::error::{Error, Result};

pub const SRWB_MAGIC: &[u8; 4] = b"SRWB";
pub const SRWB_VERSION: u16 = 1;

/// Named parameter tensors in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightBundle {
    entries: Vec<(String, Tensor)>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces an entry. Replacing keeps the original position.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.entries.push((name, tensor)),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let i = self.entries.iter().position(|(n, _)| n == name)?;
        Some(self.entries.remove(i).1)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload: usize = self.entries.iter().map(|(_, t)| t.len() * 4).sum();
        let mut out = Vec::with_capacity(10 + payload + 64 * self.entries.len());
        out.extend_from_slice(SRWB_MAGIC);
        out.extend_from_slice(&SRWB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            let len = u16::try_from(name.len()).expect("parameter name longer than u16");
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(u8::try_from(t.shape().len()).expect("rank exceeds u8"));
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            put_f32s(&mut out, t.data());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(SRWB_MAGIC)?;
        r.version(SRWB_VERSION)?;
        let count = r.u32("entry count")?;
        let mut bundle = WeightBundle::new();
        for _ in 0..count {
            let at = r.offset();
            let len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| Error::format(at + 2, "name is not UTF-8"))?
                .to_string();
            if bundle.get(&name).is_some() {
                return Err(Error::format(at, format!("duplicate entry `{name}`")));
            }
            let ndim = r.u8("ndim")? as usize;
            let dims_at = r.offset();
            let dims = (0..ndim)
                .map(|_| r.u32("dim"))
                .collect::<Result<Vec<u32>>>()?;
            let count = checked_product(&dims, dims_at)?;
            let data = r.f32_vec(count, &format!("payload of `{name}`"))?;
            let shape = dims.into_iter().map(|d| d as usize).collect();
            bundle.insert(name, Tensor::new(shape, data)?);
        }
        r.finish()?;
        Ok(bundle)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }
}
