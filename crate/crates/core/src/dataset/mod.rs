//! Supervised windows, normalization and on-disk storage for channel
//! sequences.

mod convert;
mod format;
mod window;

pub use convert::{frame_to_tensor, from_real_tensor, to_real_tensor};
pub use format::{
    decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use window::{make_windows, DatasetSplit, Region, SampleWindow, DEFAULT_SPLIT};
