//! Binary dataset format, little-endian throughout:
//!
//! ```text
//! magic "OTFSDS1\0"   8 bytes
//! version            u32 (= 1)
//! M, N, frame_count  u32 each
//! seed               u64
//! speed_kmh          f64
//! carrier_hz         f64
//! frame_duration_s   f64
//! frame_count · (MN)² complex entries as (re, im) f32 pairs,
//! frames in time order, row-major within a frame
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::binio::Reader;
use crate::channel::{ChannelSequence, SequenceMeta};
use crate::error::{Error, Result};
use crate::otfs::{ComplexMatrix, DdChannelMatrix, OtfsDims};

pub const DATASET_MAGIC: &[u8; 8] = b"OTFSDS1\0";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: u64 = 8 + 4 * 4 + 8 * 4;

pub fn encode_dataset(seq: &ChannelSequence) -> Vec<u8> {
    let dims = seq.dims();
    let s = dims.side();
    let meta = seq.meta();
    let mut out = Vec::with_capacity(HEADER_LEN as usize + seq.len() * s * s * 8);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.m() as u32).to_le_bytes());
    out.extend_from_slice(&(dims.n() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());
    out.extend_from_slice(&meta.speed_kmh.to_le_bytes());
    out.extend_from_slice(&meta.carrier_hz.to_le_bytes());
    out.extend_from_slice(&meta.frame_duration_s.to_le_bytes());
    for frame in seq.frames() {
        for z in frame.matrix().as_slice() {
            out.extend_from_slice(&(z.re as f32).to_le_bytes());
            out.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<ChannelSequence> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let version_at = r.offset();
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            offset: version_at,
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let dims_at = r.offset();
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let frame_count = r.u32()? as usize;
    let dims = OtfsDims::new(m, n).map_err(|e| Error::Malformed {
        offset: dims_at,
        reason: e.to_string(),
    })?;
    if frame_count == 0 {
        return Err(Error::Malformed {
            offset: dims_at + 8,
            reason: "frame count is zero".into(),
        });
    }
    let meta = SequenceMeta {
        seed: r.u64()?,
        speed_kmh: r.f64()?,
        carrier_hz: r.f64()?,
        frame_duration_s: r.f64()?,
        pdp: None,
    };
    let s = dims.side();
    r.require(frame_count as u64 * (s * s) as u64 * 8)?;
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let at = r.offset();
        let mut entries = Vec::with_capacity(s * s);
        for _ in 0..s * s {
            let re = r.f32()? as f64;
            let im = r.f32()? as f64;
            entries.push(Complex64::new(re, im));
        }
        let frame = ComplexMatrix::from_vec(s, s, entries)
            .and_then(|mat| DdChannelMatrix::new(dims, mat))
            .map_err(|e| Error::Malformed {
                offset: at,
                reason: e.to_string(),
            })?;
        frames.push(frame);
    }
    r.finish()?;
    ChannelSequence::new(dims, frames, meta)
}

pub fn save_dataset(path: impl AsRef<Path>, seq: &ChannelSequence) -> Result<()> {
    fs::write(path, encode_dataset(seq))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<ChannelSequence> {
    decode_dataset(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};

    fn sample() -> ChannelSequence {
        generate_sequence(
            OtfsDims::new(4, 2).unwrap(),
            &MobilityProfile::high_speed_rail(),
            &PowerDelayProfile::eva(),
            3,
            77,
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_dataset(&sample());
        assert_eq!(&bytes[..8], b"OTFSDS1\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 77);
        assert_eq!(bytes.len(), 56 + 3 * 64 * 8);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let bytes = encode_dataset(&sample());
        let loaded = decode_dataset(&bytes).unwrap();
        assert_eq!(encode_dataset(&loaded), bytes);
        let again = decode_dataset(&encode_dataset(&loaded)).unwrap();
        assert_eq!(again, loaded);
        assert_eq!(loaded.meta().seed, 77);
    }

    #[test]
    fn corruption_is_reported() {
        let bytes = encode_dataset(&sample());

        let mut bad = bytes.clone();
        bad[0] = b'X';
        match decode_dataset(&bad) {
            Err(Error::BadMagic { offset, expected, .. }) => {
                assert_eq!(offset, 0);
                assert_eq!(expected, "OTFSDS1\0");
            }
            other => panic!("expected bad magic, got {other:?}"),
        }

        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(matches!(
            decode_dataset(&bad),
            Err(Error::VersionMismatch { offset: 8, found: 2, .. })
        ));

        match decode_dataset(&bytes[..bytes.len() - 5]) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 56),
            other => panic!("expected truncation, got {other:?}"),
        }
        assert!(matches!(decode_dataset(&bytes[..20]), Err(Error::Truncated { .. })));

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_dataset(&long), Err(Error::Malformed { .. })));
    }
}
