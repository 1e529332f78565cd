use std::ops::Range;
use std::sync::Arc;

use super::convert::frame_to_tensor;
use crate::channel::ChannelSequence;
use crate::error::{arg_err, Result};
use crate::otfs::OtfsDims;
use crate::tensor::RealTensor;

/// One supervised example: `history_len` frames ending just before
/// `t_index`, followed by `horizon` target frames starting at `t_index`.
///
/// Windows index into a shared frame store instead of owning copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleWindow {
    pub t_index: usize,
    pub history_len: usize,
    pub horizon: usize,
}

impl SampleWindow {
    pub fn history_range(&self) -> Range<usize> {
        self.t_index - self.history_len..self.t_index
    }

    pub fn target_range(&self) -> Range<usize> {
        self.t_index..self.t_index + self.horizon
    }

    pub fn history<'a>(&self, frames: &'a [RealTensor]) -> &'a [RealTensor] {
        &frames[self.history_range()]
    }

    pub fn targets<'a>(&self, frames: &'a [RealTensor]) -> &'a [RealTensor] {
        &frames[self.target_range()]
    }

    /// `[L, 2, S, S]` history tensor.
    pub fn history_tensor(&self, frames: &[RealTensor]) -> RealTensor {
        stack(self.history(frames))
    }

    /// `[H, 2, S, S]` target tensor.
    pub fn target_tensor(&self, frames: &[RealTensor]) -> RealTensor {
        stack(self.targets(frames))
    }

    /// Same targets, seen through only the most recent `len` history frames.
    pub fn with_history(&self, len: usize) -> Self {
        Self {
            history_len: len,
            ..*self
        }
    }
}

fn stack(frames: &[RealTensor]) -> RealTensor {
    let refs: Vec<&RealTensor> = frames.iter().collect();
    RealTensor::stack(&refs).expect("frame store holds equally shaped frames")
}

/// Sliding windows over `frame_count` frames whose targets all lie in
/// `targets`.
fn windows_in(
    frame_count: usize,
    targets: Range<usize>,
    history_len: usize,
    horizon: usize,
    stride: usize,
) -> Vec<SampleWindow> {
    let first = targets.start.max(history_len);
    let end = targets.end.min(frame_count);
    (first..end)
        .step_by(stride)
        .take_while(|t| t + horizon <= end)
        .map(|t_index| SampleWindow {
            t_index,
            history_len,
            horizon,
        })
        .collect()
}

fn check_window_args(history_len: usize, horizon: usize, stride: usize) -> Result<()> {
    if history_len == 0 || horizon == 0 || stride == 0 {
        return arg_err(format!(
            "history ({history_len}), horizon ({horizon}) and stride ({stride}) must be positive"
        ));
    }
    Ok(())
}

/// Sliding windows over the whole sequence;
/// `floor((len − L − H) / stride) + 1` of them.
pub fn make_windows(
    seq: &ChannelSequence,
    history_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<SampleWindow>> {
    check_window_args(history_len, horizon, stride)?;
    if seq.len() < history_len + horizon {
        return arg_err(format!(
            "sequence of {} frames is too short for history {history_len} + horizon {horizon}",
            seq.len()
        ));
    }
    Ok(windows_in(seq.len(), 0..seq.len(), history_len, horizon, stride))
}

/// Which chronological part of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Train,
    Val,
    Test,
}

/// Chronological train/validation/test split over a shared frame store.
///
/// Targets of train windows all precede targets of validation windows,
/// which precede test targets. Histories may reach back across a boundary.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    dims: OtfsDims,
    frames: Arc<Vec<RealTensor>>,
    bounds: [usize; 2],
    norm_scale: f64,
    normalized: bool,
    pub train: Vec<SampleWindow>,
    pub val: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
}

/// Default chronological fractions for train and validation; the rest is test.
pub const DEFAULT_SPLIT: (f64, f64) = (0.70, 0.15);

impl DatasetSplit {
    /// Splits frame indices at `train_frac` and `train_frac + val_frac`.
    pub fn chronological(
        seq: &ChannelSequence,
        history_len: usize,
        horizon: usize,
        stride: usize,
        (train_frac, val_frac): (f64, f64),
    ) -> Result<Self> {
        check_window_args(history_len, horizon, stride)?;
        if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0) {
            return arg_err(format!(
                "invalid split fractions train={train_frac} val={val_frac}"
            ));
        }
        let n = seq.len();
        let a = (train_frac * n as f64).round() as usize;
        let b = ((train_frac + val_frac) * n as f64).round() as usize;
        let frames = seq.frames().iter().map(frame_to_tensor).collect();
        let split = Self::from_frames(seq.dims(), Arc::new(frames), [a, b], history_len, horizon, stride);
        if split.train.is_empty() || split.test.is_empty() {
            return arg_err(format!(
                "{n} frames give {} train and {} test windows; need at least one of each",
                split.train.len(),
                split.test.len()
            ));
        }
        Ok(split)
    }

    /// Every window of `seq` goes to the test region, normalized by an
    /// externally supplied scale (typically another split's train scale).
    pub fn test_only(
        seq: &ChannelSequence,
        history_len: usize,
        horizon: usize,
        norm_scale: f64,
    ) -> Result<Self> {
        check_window_args(history_len, horizon, 1)?;
        if !(norm_scale > 0.0 && norm_scale.is_finite()) {
            return arg_err(format!("normalization scale must be positive, got {norm_scale}"));
        }
        let frames: Vec<RealTensor> = seq
            .frames()
            .iter()
            .map(|f| frame_to_tensor(f).scale(1.0 / norm_scale))
            .collect();
        let mut split =
            Self::from_frames(seq.dims(), Arc::new(frames), [0, 0], history_len, horizon, 1);
        if split.test.is_empty() {
            return arg_err("sequence too short for a single test window");
        }
        split.norm_scale = norm_scale;
        split.normalized = true;
        Ok(split)
    }

    fn from_frames(
        dims: OtfsDims,
        frames: Arc<Vec<RealTensor>>,
        bounds: [usize; 2],
        history_len: usize,
        horizon: usize,
        stride: usize,
    ) -> Self {
        let n = frames.len();
        let mk = |r: Range<usize>| windows_in(n, r, history_len, horizon, stride);
        Self {
            dims,
            train: mk(0..bounds[0]),
            val: mk(bounds[0]..bounds[1]),
            test: mk(bounds[1]..n),
            frames,
            bounds,
            norm_scale: 1.0,
            normalized: false,
        }
    }

    pub fn dims(&self) -> OtfsDims {
        self.dims
    }

    /// Shared `[2, S, S]` frame store (normalized once [`Self::normalize`] ran).
    pub fn frames(&self) -> &[RealTensor] {
        &self.frames
    }

    pub fn norm_scale(&self) -> f64 {
        self.norm_scale
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Frame index range whose targets belong to `region`.
    pub fn region_range(&self, region: Region) -> Range<usize> {
        match region {
            Region::Train => 0..self.bounds[0],
            Region::Val => self.bounds[0]..self.bounds[1],
            Region::Test => self.bounds[1]..self.frames.len(),
        }
    }

    /// Re-windows one region with a different history or horizon.
    pub fn windows(&self, region: Region, history_len: usize, horizon: usize) -> Vec<SampleWindow> {
        windows_in(
            self.frames.len(),
            self.region_range(region),
            history_len,
            horizon,
            1,
        )
    }

    /// Divides every frame by the largest absolute value seen in the frames
    /// used by training windows.
    pub fn normalize(mut self) -> Result<Self> {
        if self.normalized {
            return Ok(self);
        }
        if self.train.is_empty() {
            return arg_err("cannot normalize without training windows");
        }
        let train_frames = 0..self.train.last().unwrap().target_range().end;
        let scale = self.frames[train_frames]
            .iter()
            .map(RealTensor::max_abs)
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return arg_err("training frames are all zero; normalization undefined");
        }
        let frames = self.frames.iter().map(|f| f.scale(1.0 / scale)).collect();
        self.frames = Arc::new(frames);
        self.norm_scale = scale;
        self.normalized = true;
        Ok(self)
    }

    /// Divides every frame by a scale fixed elsewhere, e.g. the one stored
    /// with a trained model.
    pub fn normalize_with(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return arg_err(format!("normalization scale must be positive, got {scale}"));
        }
        if self.normalized {
            return arg_err("split is already normalized");
        }
        let frames = self.frames.iter().map(|f| f.scale(1.0 / scale)).collect();
        self.frames = Arc::new(frames);
        self.norm_scale = scale;
        self.normalized = true;
        Ok(self)
    }

    /// Maps a normalized tensor back to channel units.
    pub fn denormalize(&self, t: &RealTensor) -> RealTensor {
        t.scale(self.norm_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_sequence, MobilityProfile, PowerDelayProfile};

    fn seq(frames: usize) -> ChannelSequence {
        generate_sequence(
            OtfsDims::new(2, 2).unwrap(),
            &MobilityProfile::high_speed_rail(),
            &PowerDelayProfile::eva(),
            frames,
            9,
        )
        .unwrap()
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&seq(11), 10, 1, 1).unwrap().len(), 1);
        let w = make_windows(&seq(13), 10, 1, 1).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.windows(2).all(|p| p[0].t_index < p[1].t_index));
        assert_eq!(make_windows(&seq(20), 4, 2, 3).unwrap().len(), (20 - 4 - 2) / 3 + 1);
        assert!(make_windows(&seq(10), 10, 1, 1).is_err());
        assert!(make_windows(&seq(10), 0, 1, 1).is_err());
    }

    #[test]
    fn split_is_chronological_and_disjoint() {
        let s = DatasetSplit::chronological(&seq(100), 5, 1, 1, DEFAULT_SPLIT).unwrap();
        let last = |w: &[SampleWindow]| w.last().unwrap().target_range().end;
        let first = |w: &[SampleWindow]| w.first().unwrap().t_index;
        assert!(last(&s.train) <= first(&s.val));
        assert!(last(&s.val) <= first(&s.test));
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 95);
    }

    #[test]
    fn normalization_uses_train_scale() {
        let s = DatasetSplit::chronological(&seq(60), 5, 1, 1, DEFAULT_SPLIT).unwrap();
        let raw = s.frames().to_vec();
        let train_max = raw[..42].iter().map(RealTensor::max_abs).fold(0.0, f64::max);
        let n = s.normalize().unwrap();
        assert_eq!(n.norm_scale(), train_max);
        for (a, b) in raw.iter().zip(n.frames()) {
            assert!(n.denormalize(b).max_abs_diff(a) < 1e-12);
        }
        // the test region keeps the train scale even if it holds larger values
        assert!(n.frames()[..42].iter().all(|f| f.max_abs() <= 1.0));
    }

    #[test]
    fn simple_scale_example() {
        let dims = OtfsDims::new(1, 1).unwrap();
        let frames: Vec<RealTensor> = [4.0, 2.0, -1.0, 3.0, 8.0]
            .iter()
            .map(|v| RealTensor::new(vec![2, 1, 1], vec![*v, 0.0]).unwrap())
            .collect();
        let split = DatasetSplit::from_frames(dims, Arc::new(frames), [3, 4], 1, 1, 1)
            .normalize()
            .unwrap();
        assert_eq!(split.norm_scale(), 4.0);
        assert_eq!(split.frames()[1].data()[0], 0.5);
        assert_eq!(split.frames()[4].data()[0], 2.0);
    }

    #[test]
    fn all_zero_train_set_is_rejected() {
        let dims = OtfsDims::new(1, 1).unwrap();
        let frames = vec![RealTensor::zeros(&[2, 1, 1]); 6];
        let split = DatasetSplit::from_frames(dims, Arc::new(frames), [3, 4], 1, 1, 1);
        assert!(split.normalize().is_err());
    }
}
