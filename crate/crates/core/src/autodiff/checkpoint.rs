use std::fs;
use std::path::Path;

use super::params::ParamSet;
use crate::binio::Reader;
use crate::error::{Error, Result};
use crate::tensor::RealTensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LDFCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializes parameters; values are stored as little-endian `f32`.
pub fn encode_checkpoint(params: &ParamSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + params.element_count() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        if t.rank() > u8::MAX as usize {
            return Err(Error::InvalidArgument(format!("{name}: rank {} too large", t.rank())));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidArgument(format!("{name}: dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in t.data() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(Error::Numerical(format!("{name}: value {v} does not fit in f32")));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamSet> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let offset = r.offset();
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            offset,
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let at = r.offset();
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Malformed {
                offset: at + 2,
                reason: "tensor name is not UTF-8".into(),
            })?
            .to_owned();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let elements = shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| Error::Malformed {
                offset: r.offset(),
                reason: format!("tensor {name:?} shape {shape:?} overflows"),
            })?;
        r.require(elements.saturating_mul(4))?;
        let data_at = r.offset();
        let mut data = Vec::with_capacity(elements as usize);
        for _ in 0..elements {
            data.push(r.f32()? as f64);
        }
        let tensor = RealTensor::new(shape, data).map_err(|e| Error::Malformed {
            offset: data_at,
            reason: format!("tensor {name:?}: {e}"),
        })?;
        params.push(name.clone(), tensor).map_err(|_| Error::Malformed {
            offset: at,
            reason: format!("duplicate tensor {name:?}"),
        })?;
    }
    r.finish()?;
    Ok(params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParamSet) -> Result<()> {
    fs::write(path, encode_checkpoint(params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamSet> {
    decode_checkpoint(&fs::read(path)?)
}
