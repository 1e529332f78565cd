use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fading::{generate_tap_gains, TapGainTrack};
use super::profile::{max_doppler, MobilityProfile, PowerDelayProfile};
use crate::error::{arg_err, shape_err, Result};
use crate::otfs::{td_to_dd_channel, ComplexMatrix, DdChannelMatrix, OtfsDims};

/// Time-domain sample rate `M·Δf`.
pub fn sample_rate(dims: OtfsDims, profile: &MobilityProfile) -> f64 {
    dims.m() as f64 * profile.subcarrier_spacing_hz()
}

/// Frame (TTI) duration `MN / sample_rate`.
pub fn frame_duration(dims: OtfsDims, profile: &MobilityProfile) -> f64 {
    dims.side() as f64 / sample_rate(dims, profile)
}

/// Circulant time-domain channel of frame `frame_index`.
///
/// Row `p` uses the tap gains at absolute sample `frame_index·MN + p`, and
/// each tap sits on the cyclic diagonal of its rounded delay.
pub fn build_htd(
    track: &TapGainTrack,
    pdp: &PowerDelayProfile,
    dims: OtfsDims,
    sample_rate: f64,
    frame_index: usize,
) -> Result<ComplexMatrix> {
    let s = dims.side();
    if track.tap_count() != pdp.tap_count() {
        return shape_err(format!(
            "track has {} taps but the profile has {}",
            track.tap_count(),
            pdp.tap_count()
        ));
    }
    let start = frame_index * s;
    if start + s > track.len() {
        return arg_err(format!(
            "frame {frame_index} needs samples up to {}, track has {}",
            start + s,
            track.len()
        ));
    }
    let delays = pdp.delays_in_samples(sample_rate);
    let mut h = ComplexMatrix::zeros(s, s);
    for (tap, &delay) in delays.iter().enumerate() {
        let gains = &track.tap(tap)[start..start + s];
        for (p, g) in gains.iter().enumerate() {
            let q = (p + s - delay % s) % s;
            let cur = h.get(p, q);
            h.set(p, q, cur + g);
        }
    }
    Ok(h)
}

/// Provenance of a generated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub seed: u64,
    pub speed_kmh: f64,
    pub carrier_hz: f64,
    pub frame_duration_s: f64,
    /// Only known for freshly generated sequences; the file format does not
    /// carry the tap table.
    pub pdp: Option<PowerDelayProfile>,
}

impl SequenceMeta {
    /// Subcarrier spacing implied by `frame_duration = N / Δf`.
    pub fn subcarrier_spacing_hz(&self, dims: OtfsDims) -> f64 {
        dims.n() as f64 / self.frame_duration_s
    }

    pub fn mobility(&self, dims: OtfsDims) -> Result<MobilityProfile> {
        MobilityProfile::new(
            self.speed_kmh,
            self.carrier_hz,
            self.subcarrier_spacing_hz(dims),
        )
    }
}

/// Time-ordered DD channel frames, one per TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSequence {
    dims: OtfsDims,
    frames: Vec<DdChannelMatrix>,
    meta: SequenceMeta,
}

impl ChannelSequence {
    pub fn new(dims: OtfsDims, frames: Vec<DdChannelMatrix>, meta: SequenceMeta) -> Result<Self> {
        if frames.is_empty() {
            return arg_err("a channel sequence needs at least one frame");
        }
        if let Some(bad) = frames.iter().position(|f| f.dims() != dims) {
            return shape_err(format!("frame {bad} does not match the sequence dims"));
        }
        Ok(Self { dims, frames, meta })
    }

    pub fn dims(&self) -> OtfsDims {
        self.dims
    }

    pub fn frames(&self) -> &[DdChannelMatrix] {
        &self.frames
    }

    pub fn meta(&self) -> &SequenceMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Simulates `frame_count` consecutive frames. Tap processes run
/// continuously across frame boundaries, and the same seed always yields
/// the same sequence.
pub fn generate_sequence(
    dims: OtfsDims,
    profile: &MobilityProfile,
    pdp: &PowerDelayProfile,
    frame_count: usize,
    seed: u64,
) -> Result<ChannelSequence> {
    if frame_count == 0 {
        return arg_err("frame_count must be at least 1");
    }
    let fs = sample_rate(dims, profile);
    let f_d = max_doppler(profile);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let track = generate_tap_gains(pdp, f_d, fs, frame_count * dims.side(), &mut rng)?;
    let frames = (0..frame_count)
        .map(|k| {
            let h_td = build_htd(&track, pdp, dims, fs, k)?;
            td_to_dd_channel(&h_td, dims)
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = SequenceMeta {
        seed,
        speed_kmh: profile.speed_kmh(),
        carrier_hz: profile.carrier_hz(),
        frame_duration_s: frame_duration(dims, profile),
        pdp: Some(pdp.clone()),
    };
    ChannelSequence::new(dims, frames, meta)
}
