use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::autodiff::{load_checkpoint, save_checkpoint, ParamSet};
use crate::baselines::{DLinear, FitConfig, LinearTrend, MovingAverage, Predictor, RepeatLast, TimeLinear};
use crate::dataset::{DatasetSplit, Region};
use crate::error::{arg_err, Error, Result};
use crate::fit::{EpochStats, TrainReport};
use crate::ldformer::{train_with_observer, Ldformer, LdformerConfig};
use crate::otfs::OtfsDims;
use crate::tensor::RealTensor;

/// Every predictor the harness can build, train, save and load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Ldformer,
    RepeatLast,
    LinearTrend,
    MovingAverage,
    TimeLinear,
    DLinear,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 6] = [
        Self::Ldformer,
        Self::RepeatLast,
        Self::LinearTrend,
        Self::MovingAverage,
        Self::TimeLinear,
        Self::DLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ldformer => "ldformer",
            Self::RepeatLast => "repeat-last",
            Self::LinearTrend => "linear-trend",
            Self::MovingAverage => "moving-average",
            Self::TimeLinear => "time-linear",
            Self::DLinear => "dlinear",
        }
    }

    pub fn is_trained(self) -> bool {
        matches!(self, Self::Ldformer | Self::TimeLinear | Self::DLinear)
    }

    fn code(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).expect("listed")
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidArgument(format!("unknown model {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// A predictor of any kind, owned.
#[derive(Debug, Clone)]
pub enum AnyPredictor {
    Ldformer(Ldformer),
    RepeatLast(RepeatLast),
    LinearTrend(LinearTrend),
    MovingAverage(MovingAverage),
    TimeLinear(TimeLinear),
    DLinear(DLinear),
}

impl AnyPredictor {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Self::Ldformer(_) => PredictorKind::Ldformer,
            Self::RepeatLast(_) => PredictorKind::RepeatLast,
            Self::LinearTrend(_) => PredictorKind::LinearTrend,
            Self::MovingAverage(_) => PredictorKind::MovingAverage,
            Self::TimeLinear(_) => PredictorKind::TimeLinear,
            Self::DLinear(_) => PredictorKind::DLinear,
        }
    }

    fn inner(&self) -> &dyn Predictor {
        match self {
            Self::Ldformer(p) => p,
            Self::RepeatLast(p) => p,
            Self::LinearTrend(p) => p,
            Self::MovingAverage(p) => p,
            Self::TimeLinear(p) => p,
            Self::DLinear(p) => p,
        }
    }
}

impl Predictor for AnyPredictor {
    fn name(&self) -> &str {
        self.inner().name()
    }

    fn predict(&self, history: &[RealTensor]) -> Result<RealTensor> {
        self.inner().predict(history)
    }

    fn predict_multi(&self, history: &[RealTensor], horizon: usize) -> Result<Vec<RealTensor>> {
        self.inner().predict_multi(history, horizon)
    }

    fn param_count(&self) -> usize {
        self.inner().param_count()
    }
}

/// Settings for [`train_predictor`]. `fit.history_len` applies to every
/// kind; the LDformer's own history length is overwritten with it.
#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub fit: FitConfig,
    pub ldformer: LdformerConfig,
    pub time_linear_hidden: usize,
    pub dlinear_kernel: usize,
    pub moving_average_window: Option<usize>,
}

impl TrainSettings {
    pub fn desk() -> Self {
        let ldformer = LdformerConfig::desk();
        Self {
            fit: FitConfig {
                history_len: ldformer.history_len,
                lr: ldformer.lr,
                batch: ldformer.batch,
                max_epochs: ldformer.max_epochs,
                patience: ldformer.patience,
                seed: ldformer.seed,
            },
            ldformer,
            time_linear_hidden: TimeLinear::DEFAULT_HIDDEN,
            dlinear_kernel: crate::baselines::DLINEAR_DEFAULT_KERNEL,
            moving_average_window: None,
        }
    }

    /// LDformer configuration with the shared fit settings applied.
    pub fn ldformer_config(&self, dims: OtfsDims) -> LdformerConfig {
        let f = &self.fit;
        LdformerConfig {
            dims,
            history_len: f.history_len,
            max_positions: self.ldformer.max_positions.max(f.history_len),
            lr: f.lr,
            batch: f.batch,
            max_epochs: f.max_epochs,
            patience: f.patience,
            seed: f.seed,
            ..self.ldformer.clone()
        }
    }
}

/// Builds and, for trainable kinds, fits a predictor on a normalized split.
/// Stateless kinds return no report.
pub fn train_predictor(
    kind: PredictorKind,
    split: &DatasetSplit,
    settings: &TrainSettings,
    observer: impl FnMut(&EpochStats),
) -> Result<(AnyPredictor, Option<TrainReport>)> {
    if kind.is_trained() && !split.is_normalized() {
        return arg_err("trainable predictors need a normalized split");
    }
    let fit = &settings.fit;
    let l = fit.history_len;
    let frames = split.frames();
    let train = || split.windows(Region::Train, l, 1);
    let val = || split.windows(Region::Val, l, 1);
    Ok(match kind {
        PredictorKind::RepeatLast => (AnyPredictor::RepeatLast(RepeatLast), None),
        PredictorKind::LinearTrend => (AnyPredictor::LinearTrend(LinearTrend), None),
        PredictorKind::MovingAverage => (
            AnyPredictor::MovingAverage(MovingAverage::new(settings.moving_average_window)?),
            None,
        ),
        PredictorKind::TimeLinear => {
            let (m, r) = TimeLinear::fit(frames, &train(), &val(), settings.time_linear_hidden, fit, observer)?;
            (AnyPredictor::TimeLinear(m), Some(r))
        }
        PredictorKind::DLinear => {
            let (m, r) = DLinear::fit(frames, &train(), &val(), settings.dlinear_kernel, fit, observer)?;
            (AnyPredictor::DLinear(m), Some(r))
        }
        PredictorKind::Ldformer => {
            let (m, r) = train_with_observer(split, settings.ldformer_config(split.dims()), observer)?;
            (AnyPredictor::Ldformer(m), Some(r))
        }
    })
}

const META_MODEL: &str = "meta.model";
const META_SCALE: &str = "meta.norm_scale";
const META_WINDOW: &str = "meta.window";
const META_ARCH: &str = "meta.ldformer";

/// Splits an `f64` into three integers below 2²², each exact in `f32`, so
/// the value survives the single-precision checkpoint bit for bit.
fn f64_to_chunks(x: f64) -> [f64; 3] {
    let b = x.to_bits();
    [(b >> 42) as f64, ((b >> 21) & 0x1f_ffff) as f64, (b & 0x1f_ffff) as f64]
}

fn chunks_to_f64(c: &[f64]) -> Result<f64> {
    let part = |v: f64, bits: u32| {
        if v >= 0.0 && v.fract() == 0.0 && v < (1u64 << bits) as f64 {
            Ok(v as u64)
        } else {
            Err(Error::Malformed {
                offset: 0,
                reason: format!("metadata chunk {v} is not a {bits}-bit integer"),
            })
        }
    };
    Ok(f64::from_bits(part(c[0], 22)? << 42 | part(c[1], 21)? << 21 | part(c[2], 21)?))
}

fn encode_f64s(values: &[f64]) -> RealTensor {
    let data: Vec<f64> = values.iter().flat_map(|&v| f64_to_chunks(v)).collect();
    RealTensor::from_parts(vec![data.len()], data)
}

fn decode_f64s(t: &RealTensor) -> Result<Vec<f64>> {
    if !t.len().is_multiple_of(3) {
        return Err(Error::Malformed {
            offset: 0,
            reason: format!("metadata length {} is not a multiple of 3", t.len()),
        });
    }
    t.data().chunks(3).map(chunks_to_f64).collect()
}

fn arch_vector(c: &LdformerConfig) -> Vec<f64> {
    let mut v = vec![
        c.dims.m() as f64,
        c.dims.n() as f64,
        c.history_len as f64,
        c.max_positions as f64,
        c.kernel as f64,
        c.stride as f64,
        c.padding as f64,
        c.latent_side as f64,
        c.trans_layers as f64,
        c.heads as f64,
        c.ffn_hidden as f64,
        c.leaky_slope,
        c.layer_norm_eps,
        c.skips as u8 as f64,
        c.output_activation as u8 as f64,
        c.pre_norm as u8 as f64,
    ];
    v.extend(c.channels.iter().map(|&ch| ch as f64));
    v
}

fn config_from_arch(v: &[f64]) -> Result<LdformerConfig> {
    const FIXED: usize = 16;
    let malformed = |reason: String| Error::Malformed { offset: 0, reason };
    if v.len() <= FIXED {
        return Err(malformed(format!("architecture record has {} fields", v.len())));
    }
    let int = |i: usize| -> Result<usize> {
        let x = v[i];
        if x >= 0.0 && x.fract() == 0.0 && x < 1e12 {
            Ok(x as usize)
        } else {
            Err(malformed(format!("architecture field {i} = {x} is not a count")))
        }
    };
    let dims = OtfsDims::new(int(0)?, int(1)?).map_err(|e| malformed(e.to_string()))?;
    let cfg = LdformerConfig {
        dims,
        history_len: int(2)?,
        max_positions: int(3)?,
        kernel: int(4)?,
        stride: int(5)?,
        padding: int(6)?,
        latent_side: int(7)?,
        trans_layers: int(8)?,
        heads: int(9)?,
        ffn_hidden: int(10)?,
        leaky_slope: v[11],
        layer_norm_eps: v[12],
        skips: int(13)? != 0,
        output_activation: int(14)? != 0,
        pre_norm: int(15)? != 0,
        channels: (FIXED..v.len()).map(int).collect::<Result<_>>()?,
        ..LdformerConfig::desk()
    };
    cfg.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(cfg)
}

/// Writes `predictor` and the normalization scale it expects as a checkpoint.
pub fn save_predictor(path: impl AsRef<Path>, predictor: &AnyPredictor, norm_scale: f64) -> Result<()> {
    save_checkpoint(path, &predictor_params(predictor, norm_scale)?)
}

/// Tensors written by [`save_predictor`].
pub fn predictor_params(predictor: &AnyPredictor, norm_scale: f64) -> Result<ParamSet> {
    if !(norm_scale > 0.0 && norm_scale.is_finite()) {
        return arg_err(format!("normalization scale must be positive, got {norm_scale}"));
    }
    let mut p = match predictor {
        AnyPredictor::Ldformer(m) => {
            let mut p = m.params().clone();
            p.push(META_ARCH, encode_f64s(&arch_vector(m.config())))?;
            p
        }
        AnyPredictor::TimeLinear(m) => m.params().clone(),
        AnyPredictor::DLinear(m) => m.to_params(),
        AnyPredictor::MovingAverage(m) => {
            let mut p = ParamSet::new();
            p.push(META_WINDOW, RealTensor::scalar(m.window.unwrap_or(0) as f64))?;
            p
        }
        AnyPredictor::RepeatLast(_) | AnyPredictor::LinearTrend(_) => ParamSet::new(),
    };
    p.push(META_MODEL, RealTensor::scalar(predictor.kind().code() as f64))?;
    p.push(META_SCALE, encode_f64s(&[norm_scale]))?;
    Ok(p)
}

/// Reads a checkpoint written by [`save_predictor`]; returns the model and
/// its normalization scale.
pub fn load_predictor(path: impl AsRef<Path>) -> Result<(AnyPredictor, f64)> {
    predictor_from_params(load_checkpoint(path)?)
}

pub fn predictor_from_params(mut p: ParamSet) -> Result<(AnyPredictor, f64)> {
    let malformed = |reason: &str| Error::Malformed { offset: 0, reason: reason.to_owned() };
    let code = p.remove(META_MODEL).ok_or_else(|| malformed("checkpoint has no model tag"))?;
    let kind = PredictorKind::ALL
        .get(code.data()[0] as usize)
        .copied()
        .ok_or_else(|| malformed("unknown model tag"))?;
    let scale = p.remove(META_SCALE).ok_or_else(|| malformed("checkpoint has no normalization scale"))?;
    let scale = decode_f64s(&scale)?[0];
    let model = match kind {
        PredictorKind::Ldformer => {
            let arch = p.remove(META_ARCH).ok_or_else(|| malformed("checkpoint has no architecture"))?;
            let cfg = config_from_arch(&decode_f64s(&arch)?)?;
            AnyPredictor::Ldformer(Ldformer::from_params(cfg, p)?)
        }
        PredictorKind::TimeLinear => AnyPredictor::TimeLinear(TimeLinear::from_params(p)?),
        PredictorKind::DLinear => AnyPredictor::DLinear(DLinear::from_params(p)?),
        PredictorKind::MovingAverage => {
            let w = p.remove(META_WINDOW).map_or(0, |t| t.data()[0] as usize);
            AnyPredictor::MovingAverage(MovingAverage::new((w > 0).then_some(w))?)
        }
        PredictorKind::RepeatLast => AnyPredictor::RepeatLast(RepeatLast),
        PredictorKind::LinearTrend => AnyPredictor::LinearTrend(LinearTrend),
    };
    Ok((model, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_are_exact_in_single_precision() {
        for x in [1.0, 0.01, 1e-5, 123.456789, f64::MIN_POSITIVE, 7.25e300] {
            let c = f64_to_chunks(x);
            let through_f32: Vec<f64> = c.iter().map(|&v| v as f32 as f64).collect();
            assert_eq!(chunks_to_f64(&through_f32).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn kinds_parse_round_trip() {
        for k in PredictorKind::ALL {
            assert_eq!(k.name().parse::<PredictorKind>().unwrap(), k);
        }
        assert!("lstm".parse::<PredictorKind>().is_err());
    }

    #[test]
    fn arch_record_round_trips() {
        for cfg in [LdformerConfig::desk(), LdformerConfig::full_scale()] {
            let back = config_from_arch(&arch_vector(&cfg)).unwrap();
            assert_eq!(arch_vector(&back), arch_vector(&cfg));
        }
    }
}
