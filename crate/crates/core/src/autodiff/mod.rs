//! Reverse-mode automatic differentiation over [`RealTensor`](crate::RealTensor).
//!
//! A [`Graph`] records one forward pass; [`Graph::backward`] sweeps it in
//! reverse. Parameters live in a [`ParamSet`], are bound to a fresh graph per
//! step, and are updated with [`AdamState`].

mod adam;
mod checkpoint;
mod graph;
pub(crate) mod kernels;
mod layers;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use graph::{AttentionMask, Graph, Var};
pub use layers::{feed_forward, multi_head_attention, AttentionWeights};
pub use params::{BoundParams, ParamSet};

#[cfg(test)]
mod tests;
