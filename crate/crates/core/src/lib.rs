//! Delay-Doppler channel simulation and channel prediction for OTFS links.
//!
//! The crate covers the whole pipeline:
//!
//! - [`otfs`]: DFT matrices, ISFFT/SFFT, Heisenberg/Wigner transforms and the
//!   time-domain to delay-Doppler channel conversion.
//! - [`channel`]: a tapped-delay-line fading simulator (EVA profile, Jakes
//!   Doppler) producing sequences of DD channel matrices, plus sparsity
//!   diagnostics.
//! - [`dataset`]: real/imaginary tensors, history windows, chronological
//!   splits, normalization and the on-disk dataset format.
//! - [`autodiff`]: a small reverse-mode autodiff engine with the layers the
//!   predictor needs, Adam, and a checkpoint format.
//! - [`ldformer`]: the CNN-Transformer predictor (convolutional compression,
//!   causal Transformer, transposed-convolution decoder).
//! - [`baselines`]: RepeatLast, LinearTrend, MovingAverage, TimeLinear and
//!   DLinear.
//! - [`harness`]: metrics, evaluation, experiment sweeps and benchmarks.

pub mod autodiff;
pub mod baselines;
pub mod channel;
pub mod dataset;
mod fit;
mod binio;
mod error;
pub mod harness;
pub mod ldformer;
pub mod otfs;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::RealTensor;
