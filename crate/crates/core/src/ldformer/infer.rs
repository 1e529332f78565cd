//! Forward pass without a tape. Encoder features are computed per frame and
//! can be reused while a history window slides, and only the positions that
//! are needed get decoded.

use std::collections::VecDeque;

use super::model::{dec_b, dec_w, enc_b, enc_w, tr, Ldformer, PE};
use crate::autodiff::kernels::{self, ConvGeom};
use crate::autodiff::AttentionMask;
use crate::error::{shape_err, Error, Result};
use crate::tensor::RealTensor;

/// Encoder activations of one frame: entry 0 is the frame itself, entry `k`
/// the output of block `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    feats: Vec<Vec<f64>>,
}

impl EncodedFrame {
    /// Flattened compact features (the frame's token before positional
    /// encoding).
    pub fn token(&self) -> &[f64] {
        self.feats.last().expect("at least the input")
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.feats[k]
    }
}

impl Ldformer {
    fn check_frame(&self, frame: &RealTensor) -> Result<()> {
        let s = self.config().side();
        if frame.shape() != [2, s, s] {
            return shape_err(format!("frame {:?}, expected [2, {s}, {s}]", frame.shape()));
        }
        Ok(())
    }

    fn geoms(&self) -> Vec<ConvGeom> {
        self.config().encoder_geoms().expect("validated config")
    }

    /// Runs the encoder on a batch of frames.
    pub fn encode_frames(&self, frames: &[RealTensor]) -> Result<Vec<EncodedFrame>> {
        for f in frames {
            self.check_frame(f)?;
        }
        let cfg = self.config();
        let n = frames.len();
        let mut level: Vec<f64> = frames.iter().flat_map(|f| f.data().iter().copied()).collect();
        let mut out: Vec<EncodedFrame> = (0..n)
            .map(|i| EncodedFrame {
                feats: vec![frames[i].data().to_vec()],
            })
            .collect();
        for (k, g) in self.geoms().iter().enumerate() {
            let co = cfg.channels[k];
            let next = kernels::conv2d_forward(&level, n, g, self.p(&enc_w(k)), co, Some(self.p(&enc_b(k))));
            let next = kernels::leaky_relu(&next, cfg.leaky_slope);
            let per = co * g.out_h * g.out_w;
            for (i, e) in out.iter_mut().enumerate() {
                e.feats.push(next[i * per..(i + 1) * per].to_vec());
            }
            level = next;
        }
        Ok(out)
    }

    /// Causal Transformer stack over `len` tokens (`tokens` is `[len, D]`
    /// flattened); positional rows `0..len` are added first.
    pub(crate) fn transformer(&self, tokens: &[f64], len: usize) -> Result<Vec<f64>> {
        let cfg = self.config();
        let d = cfg.token_dim();
        if len > cfg.max_positions {
            return Err(Error::InvalidArgument(format!(
                "sequence length {len} exceeds positional table length {}",
                cfg.max_positions
            )));
        }
        let pe = &self.p(PE)[..len * d];
        let mut z: Vec<f64> = tokens.iter().zip(pe).map(|(a, b)| a + b).collect();
        let mask = AttentionMask::causal(len);
        let eps = cfg.layer_norm_eps;
        for l in 0..cfg.trans_layers {
            let p = |n: &str| self.p(&tr(l, n));
            let lin = |x: &[f64], w: &str, b: &str, out: usize| {
                kernels::linear_forward(x, len, x.len() / len, p(w), out, Some(p(b)))
            };
            let ln = |x: &[f64], name: &str| {
                kernels::layer_norm_forward(x, d, p(&format!("{name}.gain")), p(&format!("{name}.bias")), eps).0
            };
            let attend = |x: &[f64]| {
                let q = lin(x, "wq", "bq", d);
                let k = lin(x, "wk", "bk", d);
                let v = lin(x, "wv", "bv", d);
                let (a, _) = kernels::attention_forward(&q, &k, &v, 1, len, d, cfg.heads, Some(mask.entries()));
                lin(&a, "wo", "bo", d)
            };
            let ffn = |x: &[f64]| {
                let h = kernels::leaky_relu(&lin(x, "ff.w1", "ff.b1", cfg.ffn_hidden), cfg.leaky_slope);
                lin(&h, "ff.w2", "ff.b2", d)
            };
            let add = |mut a: Vec<f64>, b: &[f64]| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            };
            z = if cfg.pre_norm {
                let z1 = add(attend(&ln(&z, "ln1")), &z);
                add(ffn(&ln(&z1, "ln2")), &z1)
            } else {
                let z1 = ln(&add(attend(&z), &z), "ln1");
                ln(&add(ffn(&z1), &z1), "ln2")
            };
        }
        Ok(z)
    }

    /// Decodes one transformer output token using the skip features of the
    /// frame at the same position.
    pub(crate) fn decode_token(&self, token: &[f64], skip: &EncodedFrame) -> Vec<f64> {
        let cfg = self.config();
        let geoms = self.geoms();
        let mut y = token.to_vec();
        for k in (0..cfg.down_blocks()).rev() {
            let g = &geoms[k];
            y = kernels::conv_transpose2d_forward(&y, 1, g, self.p(&dec_w(k)), cfg.channels[k], Some(self.p(&dec_b(k))));
            if k > 0 || cfg.output_activation {
                y = kernels::leaky_relu(&y, cfg.leaky_slope);
            }
            if cfg.skips {
                y.iter_mut().zip(skip.level(k)).for_each(|(a, b)| *a += b);
            }
        }
        y
    }

    /// Compact features `[L, C_K, R, R]` and per-frame skip features of a
    /// history `[L, 2, S, S]`.
    pub fn encode(&self, x: &RealTensor) -> Result<(RealTensor, Vec<EncodedFrame>)> {
        let frames = split_frames(x)?;
        let enc = self.encode_frames(&frames)?;
        let cfg = self.config();
        let r = cfg.latent_side;
        let data = enc.iter().flat_map(|e| e.token().iter().copied()).collect();
        let c_k = cfg.channels[cfg.down_blocks() - 1];
        Ok((RealTensor::from_parts(vec![enc.len(), c_k, r, r], data), enc))
    }

    /// Transformer outputs `[L, D]` for compact features `[L, ...]`.
    pub fn temporal_forward(&self, features: &RealTensor) -> Result<RealTensor> {
        let d = self.config().token_dim();
        let len = features.shape().first().copied().unwrap_or(0);
        if len == 0 || features.len() != len * d {
            return shape_err(format!("features {:?} do not hold tokens of width {d}", features.shape()));
        }
        let z = self.transformer(features.data(), len)?;
        Ok(RealTensor::from_parts(vec![len, d], z))
    }

    /// Decoder output `[L, 2, S, S]` for tokens `[L, D]`.
    pub fn decode(&self, tokens: &RealTensor, skips: &[EncodedFrame]) -> Result<RealTensor> {
        let d = self.config().token_dim();
        if tokens.shape() != [skips.len(), d] {
            return shape_err(format!(
                "tokens {:?} with {} skip frames, width {d}",
                tokens.shape(),
                skips.len()
            ));
        }
        let s = self.config().side();
        let data = tokens
            .data()
            .chunks(d)
            .zip(skips)
            .flat_map(|(t, e)| self.decode_token(t, e))
            .collect();
        Ok(RealTensor::from_parts(vec![skips.len(), 2, s, s], data))
    }

    /// Full right-shifted output sequence for a history `[L, 2, S, S]`.
    pub fn forward_sequence(&self, x: &RealTensor) -> Result<RealTensor> {
        let (features, enc) = self.encode(x)?;
        let tokens = self.temporal_forward(&features)?;
        self.decode(&tokens, &enc)
    }

    fn predict_from_encoded(&self, enc: &[EncodedFrame]) -> Result<RealTensor> {
        let d = self.config().token_dim();
        let tokens: Vec<f64> = enc.iter().flat_map(|e| e.token().iter().copied()).collect();
        let z = self.transformer(&tokens, enc.len())?;
        let last = enc.len() - 1;
        let y = self.decode_token(&z[last * d..], &enc[last]);
        let s = self.config().side();
        let out = RealTensor::from_parts(vec![2, s, s], y);
        if !out.is_finite() {
            return Err(Error::Numerical("prediction is not finite".into()));
        }
        Ok(out)
    }

    /// Prediction of the frame following `history` (oldest first).
    pub fn predict_one(&self, history: &[RealTensor]) -> Result<RealTensor> {
        if history.is_empty() {
            return Err(Error::InvalidArgument("empty history".into()));
        }
        let enc = self.encode_frames(history)?;
        self.predict_from_encoded(&enc)
    }

    /// Autoregressive forecast of `horizon` frames. Each prediction joins
    /// the window and the oldest frame leaves; encoder features of frames
    /// already in the window are reused.
    pub fn predict_multi(&self, history: &[RealTensor], horizon: usize) -> Result<Vec<RealTensor>> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if history.is_empty() {
            return Err(Error::InvalidArgument("empty history".into()));
        }
        let mut window: VecDeque<EncodedFrame> = self.encode_frames(history)?.into();
        let mut out = Vec::with_capacity(horizon);
        for step in 0..horizon {
            let next = self.predict_from_encoded(window.make_contiguous())?;
            if step + 1 < horizon {
                window.pop_front();
                window.extend(self.encode_frames(std::slice::from_ref(&next))?);
            }
            out.push(next);
        }
        Ok(out)
    }
}

fn split_frames(x: &RealTensor) -> Result<Vec<RealTensor>> {
    if x.rank() != 4 || x.shape()[0] == 0 {
        return shape_err(format!("history {:?}, expected [L, 2, S, S]", x.shape()));
    }
    Ok((0..x.shape()[0]).map(|i| x.index_axis0(i)).collect())
}
