//! Composite layers built from graph primitives.

use super::graph::{AttentionMask, Graph, Var};
use crate::error::Result;

/// Projection weights of one multi-head attention block. Each weight is
/// `[D, D]` with a `[D]` bias.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

/// Self-attention over `z: [B, L, D]` followed by the output projection.
pub fn multi_head_attention(
    g: &mut Graph,
    z: Var,
    w: &AttentionWeights,
    heads: usize,
    mask: Option<&AttentionMask>,
) -> Result<Var> {
    let q = g.linear(z, w.wq, Some(w.bq))?;
    let k = g.linear(z, w.wk, Some(w.bk))?;
    let v = g.linear(z, w.wv, Some(w.bv))?;
    let a = g.attention(q, k, v, heads, mask)?;
    g.linear(a, w.wo, Some(w.bo))
}

/// Position-wise `W2 · act(W1 · z + b1) + b2` with a leaky ReLU.
pub fn feed_forward(
    g: &mut Graph,
    z: Var,
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
    slope: f64,
) -> Result<Var> {
    let h = g.linear(z, w1, Some(b1))?;
    let h = g.leaky_relu(h, slope);
    g.linear(h, w2, Some(b2))
}
