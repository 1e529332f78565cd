//! CNN-Transformer channel predictor.
//!
//! Each history frame `[2, S, S]` is compressed by strided convolutions to a
//! `[C_K, R, R]` map and flattened into one token. A causal Transformer runs
//! over the tokens, and transposed convolutions with encoder skips expand
//! every output token back to a full frame. Output position `i` predicts the
//! frame after input `i`, so the last position is the one-step forecast.

mod config;
mod infer;
mod model;
mod train;

pub use config::{LdformerConfig, ParamBreakdown};
pub use infer::EncodedFrame;
pub use model::{graph_forward, Ldformer};
pub use crate::fit::{EpochStats, TrainReport};
pub use train::{train, train_windows, train_with_observer};

#[cfg(test)]
mod tests;
