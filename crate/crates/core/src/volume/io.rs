//! SRVL volume files.
//!
//! Layout: `SRVL`, version `u16` (1), dims `t, h, w` as `u32`, then `t·h·w`
//! `f32` scalars in row-major order. All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::{Dims3, Volume3};
use crate::binio::{checked_product, put_f32s, ByteReader};
use crate::error::{Error, Result};

pub const SRVL_MAGIC: &[u8; 4] = b"SRVL";
pub const SRVL_VERSION: u16 = 1;

pub fn encode_srvl(v: &Volume3) -> Vec<u8> {
    let d = v.dims();
    let mut out = Vec::with_capacity(18 + 4 * v.len());
    out.extend_from_slice(SRVL_MAGIC);
    out.extend_from_slice(&SRVL_VERSION.to_le_bytes());
    for n in d.as_array() {
        let n = u32::try_from(n).expect("volume dim exceeds u32");
        out.extend_from_slice(&n.to_le_bytes());
    }
    put_f32s(&mut out, v.data());
    out
}

pub fn decode_srvl(bytes: &[u8]) -> Result<Volume3> {
    let mut r = ByteReader::new(bytes);
    r.magic(SRVL_MAGIC)?;
    r.version(SRVL_VERSION)?;
    let header_at = r.offset();
    let dims = [r.u32("t")?, r.u32("h")?, r.u32("w")?];
    let count = checked_product(&dims, header_at)?;
    if count == 0 {
        return Err(Error::format(header_at, format!("zero dim in {dims:?}")));
    }
    let data = r.f32_vec(count, "payload")?;
    r.finish()?;
    let dims = Dims3::new(dims[0] as usize, dims[1] as usize, dims[2] as usize);
    Volume3::new(dims, data)
}

pub fn write_srvl(path: impl AsRef<Path>, v: &Volume3) -> Result<()> {
    fs::write(path, encode_srvl(v))?;
    Ok(())
}

pub fn read_srvl(path: impl AsRef<Path>) -> Result<Volume3> {
    decode_srvl(&fs::read(path)?)
}
