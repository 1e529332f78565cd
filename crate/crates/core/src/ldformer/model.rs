use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::LdformerConfig;
use crate::autodiff::{
    feed_forward, multi_head_attention, AttentionMask, AttentionWeights, BoundParams, Graph,
    ParamSet, Var,
};
use crate::error::{shape_err, Error, Result};
use crate::tensor::RealTensor;

/// Trained (or freshly initialized) predictor: configuration plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Ldformer {
    config: LdformerConfig,
    params: ParamSet,
}

pub(crate) fn enc_w(k: usize) -> String {
    format!("enc.{k}.weight")
}
pub(crate) fn enc_b(k: usize) -> String {
    format!("enc.{k}.bias")
}
pub(crate) fn dec_w(k: usize) -> String {
    format!("dec.{k}.weight")
}
pub(crate) fn dec_b(k: usize) -> String {
    format!("dec.{k}.bias")
}
pub(crate) fn tr(l: usize, name: &str) -> String {
    format!("tr.{l}.{name}")
}
pub(crate) const PE: &str = "pe";

const ATTN: [&str; 8] = ["wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"];

impl Ldformer {
    /// Fresh weights: uniform fan-in scaling for convolutions and linear
    /// maps, zero biases, unit layer-norm gains (except the final one, see
    /// [`LdformerConfig::output_norm_gain`]) and a small Gaussian positional
    /// table.
    pub fn init(config: LdformerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamSet::new();
        let k2 = config.kernel * config.kernel;
        let stride2 = config.stride * config.stride;
        let uniform = |shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = (3.0 / fan_in.max(1) as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            RealTensor::from_parts(shape.to_vec(), data)
        };
        for k in 0..config.down_blocks() {
            let (ci, co) = (config.in_channels(k), config.channels[k]);
            p.push(enc_w(k), uniform(&[co, ci, config.kernel, config.kernel], ci * k2, &mut rng))?;
            p.push(enc_b(k), RealTensor::zeros(&[co]))?;
        }
        let d = config.token_dim();
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let pe = (0..config.max_positions * d).map(|_| normal.sample(&mut rng)).collect();
        p.push(PE, RealTensor::from_parts(vec![config.max_positions, d], pe))?;
        let f = config.ffn_hidden;
        for l in 0..config.trans_layers {
            for pair in ATTN.chunks(2) {
                p.push(tr(l, pair[0]), uniform(&[d, d], d, &mut rng))?;
                p.push(tr(l, pair[1]), RealTensor::zeros(&[d]))?;
            }
            p.push(tr(l, "ln1.gain"), RealTensor::full(&[d], 1.0))?;
            p.push(tr(l, "ln1.bias"), RealTensor::zeros(&[d]))?;
            p.push(tr(l, "ff.w1"), uniform(&[d, f], d, &mut rng))?;
            p.push(tr(l, "ff.b1"), RealTensor::zeros(&[f]))?;
            p.push(tr(l, "ff.w2"), uniform(&[f, d], f, &mut rng))?;
            p.push(tr(l, "ff.b2"), RealTensor::zeros(&[d]))?;
            let last = l + 1 == config.trans_layers && !config.pre_norm;
            let gain = if last { config.output_norm_gain } else { 1.0 };
            p.push(tr(l, "ln2.gain"), RealTensor::full(&[d], gain))?;
            p.push(tr(l, "ln2.bias"), RealTensor::zeros(&[d]))?;
        }
        // dec.k inverts enc.k, so it maps channels[k] back to in_channels(k).
        for k in (0..config.down_blocks()).rev() {
            let (ci, co) = (config.channels[k], config.in_channels(k));
            let fan_in = (ci * k2 / stride2).max(1);
            p.push(dec_w(k), uniform(&[ci, co, config.kernel, config.kernel], fan_in, &mut rng))?;
            p.push(dec_b(k), RealTensor::zeros(&[co]))?;
        }
        Ok(Self { config, params: p })
    }

    /// Wraps existing weights after checking every expected tensor.
    pub fn from_params(config: LdformerConfig, params: ParamSet) -> Result<Self> {
        let template = Self::init(LdformerConfig { seed: 0, ..config.clone() })?;
        for (name, t) in template.params.iter() {
            let got = params.require(name)?;
            if got.shape() != t.shape() {
                return shape_err(format!("{name}: expected {:?}, found {:?}", t.shape(), got.shape()));
            }
        }
        if params.len() != template.params.len() {
            let extra: Vec<&str> = params
                .names()
                .iter()
                .filter(|n| template.params.get(n).is_none())
                .map(String::as_str)
                .collect();
            return Err(Error::InvalidArgument(format!("unexpected parameters {extra:?}")));
        }
        if !params.is_finite() {
            return Err(Error::Numerical("parameters contain non-finite values".into()));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &LdformerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.element_count()
    }

    pub(crate) fn p(&self, name: &str) -> &[f64] {
        self.params.get(name).expect("layout checked at construction").data()
    }
}

/// Records the right-shifted forward pass of `batch` sequences on `g`.
///
/// `x` is `[batch·len, 2, S, S]` in time-major order per sequence; the
/// result has the same shape, position `i` predicting the frame after
/// input `i`.
pub fn graph_forward(
    g: &mut Graph,
    bound: &BoundParams,
    cfg: &LdformerConfig,
    x: Var,
    batch: usize,
    len: usize,
) -> Result<Var> {
    if len > cfg.max_positions {
        return Err(Error::InvalidArgument(format!(
            "sequence length {len} exceeds positional table length {}",
            cfg.max_positions
        )));
    }
    let (s, slope) = (cfg.stride, cfg.leaky_slope);
    let mut feats = vec![x];
    for k in 0..cfg.down_blocks() {
        let h = g.conv2d(feats[k], bound.var(&enc_w(k))?, Some(bound.var(&enc_b(k))?), s, cfg.padding)?;
        feats.push(g.leaky_relu(h, slope));
    }
    let d = cfg.token_dim();
    let mut z = g.reshape(feats[cfg.down_blocks()], &[batch, len, d])?;
    z = g.add_positional(z, bound.var(PE)?)?;
    let mask = AttentionMask::causal(len);
    for l in 0..cfg.trans_layers {
        let v = |n: &str| bound.var(&tr(l, n));
        let w = AttentionWeights {
            wq: v("wq")?,
            bq: v("bq")?,
            wk: v("wk")?,
            bk: v("bk")?,
            wv: v("wv")?,
            bv: v("bv")?,
            wo: v("wo")?,
            bo: v("bo")?,
        };
        let (ln1, ln2) = ((v("ln1.gain")?, v("ln1.bias")?), (v("ln2.gain")?, v("ln2.bias")?));
        let eps = cfg.layer_norm_eps;
        let ffn = |g: &mut Graph, x| feed_forward(g, x, v("ff.w1")?, v("ff.b1")?, v("ff.w2")?, v("ff.b2")?, slope);
        z = if cfg.pre_norm {
            let n1 = g.layer_norm(z, ln1.0, ln1.1, eps)?;
            let a = multi_head_attention(g, n1, &w, cfg.heads, Some(&mask))?;
            let z1 = g.add(a, z)?;
            let n2 = g.layer_norm(z1, ln2.0, ln2.1, eps)?;
            let f = ffn(g, n2)?;
            g.add(f, z1)?
        } else {
            let a = multi_head_attention(g, z, &w, cfg.heads, Some(&mask))?;
            let a = g.add(a, z)?;
            let z1 = g.layer_norm(a, ln1.0, ln1.1, eps)?;
            let f = ffn(g, z1)?;
            let f = g.add(f, z1)?;
            g.layer_norm(f, ln2.0, ln2.1, eps)?
        };
    }
    let c_k = cfg.channels[cfg.down_blocks() - 1];
    let mut y = g.reshape(z, &[batch * len, c_k, cfg.latent_side, cfg.latent_side])?;
    for k in (0..cfg.down_blocks()).rev() {
        y = g.conv_transpose2d(y, bound.var(&dec_w(k))?, Some(bound.var(&dec_b(k))?), s, cfg.padding)?;
        if k > 0 || cfg.output_activation {
            y = g.leaky_relu(y, slope);
        }
        if cfg.skips {
            y = g.add(y, feats[k])?;
        }
    }
    Ok(y)
}
