use num_complex::Complex64;

use crate::error::{arg_err, shape_err, Result};
use crate::otfs::{ComplexMatrix, DdChannelMatrix, OtfsDims};
use crate::tensor::RealTensor;

/// One DD frame as a `[2, S, S]` tensor: plane 0 real, plane 1 imaginary.
pub fn frame_to_tensor(frame: &DdChannelMatrix) -> RealTensor {
    let s = frame.dims().side();
    let entries = frame.matrix().as_slice();
    let mut data = Vec::with_capacity(2 * s * s);
    data.extend(entries.iter().map(|z| z.re));
    data.extend(entries.iter().map(|z| z.im));
    RealTensor::from_parts(vec![2, s, s], data)
}

/// Stacks `L` frames into an `[L, 2, S, S]` tensor.
pub fn to_real_tensor(frames: &[DdChannelMatrix]) -> Result<RealTensor> {
    let Some(first) = frames.first() else {
        return arg_err("cannot build a tensor from zero frames");
    };
    let dims = first.dims();
    if frames.iter().any(|f| f.dims() != dims) {
        return shape_err("frames have mixed dims");
    }
    let s = dims.side();
    let mut data = Vec::with_capacity(frames.len() * 2 * s * s);
    for f in frames {
        data.extend(frame_to_tensor(f).into_data());
    }
    Ok(RealTensor::from_parts(vec![frames.len(), 2, s, s], data))
}

/// Recombines a `[2, S, S]` tensor into a complex DD frame.
pub fn from_real_tensor(t: &RealTensor, dims: OtfsDims) -> Result<DdChannelMatrix> {
    let s = dims.side();
    if t.shape() != [2, s, s] {
        return shape_err(format!(
            "expected [2, {s}, {s}] for M={} N={}, got {:?}",
            dims.m(),
            dims.n(),
            t.shape()
        ));
    }
    let (re, im) = t.data().split_at(s * s);
    let entries = re
        .iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    DdChannelMatrix::new(dims, ComplexMatrix::from_vec(s, s, entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_frame_layout() {
        let dims = OtfsDims::new(1, 1).unwrap();
        let m = ComplexMatrix::from_vec(1, 1, vec![Complex64::new(3.0, 4.0)]).unwrap();
        let f = DdChannelMatrix::new(dims, m).unwrap();
        let t = to_real_tensor(std::slice::from_ref(&f)).unwrap();
        assert_eq!(t.shape(), &[1, 2, 1, 1]);
        assert_eq!(t.data(), &[3.0, 4.0]);
        assert_eq!(from_real_tensor(&t.index_axis0(0), dims).unwrap(), f);
    }

    #[test]
    fn real_frames_have_empty_imaginary_plane() {
        let dims = OtfsDims::new(2, 1).unwrap();
        let m = ComplexMatrix::from_fn(2, 2, |r, c| Complex64::new((r * 2 + c) as f64, 0.0));
        let f = DdChannelMatrix::new(dims, m).unwrap();
        let t = frame_to_tensor(&f);
        assert_eq!(&t.data()[..4], &[0.0, 1.0, 2.0, 3.0]);
        assert!(t.data()[4..].iter().all(|v| *v == 0.0));
        assert_eq!(from_real_tensor(&t, dims).unwrap(), f);
    }

    #[test]
    fn shape_errors() {
        let a = DdChannelMatrix::new(OtfsDims::new(1, 1).unwrap(), ComplexMatrix::zeros(1, 1))
            .unwrap();
        let b = DdChannelMatrix::new(OtfsDims::new(2, 1).unwrap(), ComplexMatrix::zeros(2, 2))
            .unwrap();
        assert!(to_real_tensor(&[a, b]).is_err());
        assert!(to_real_tensor(&[]).is_err());
        let dims = OtfsDims::new(2, 1).unwrap();
        assert!(from_real_tensor(&RealTensor::zeros(&[3, 2, 2]), dims).is_err());
        assert!(from_real_tensor(&RealTensor::zeros(&[2, 1, 1]), dims).is_err());
    }
}
