//! OTFS signal-domain math: DFT matrices, ISFFT/SFFT, the Heisenberg and
//! Wigner transforms, and conversion of time-domain channel matrices into the
//! effective delay-Doppler channel.

mod matrix;
mod noise;
mod transforms;

pub use matrix::{ComplexMatrix, DdChannelMatrix, OtfsDims};
pub use noise::apply_awgn;
pub use transforms::{
    dd_to_td_channel, dft_matrix, heisenberg_transmit, isfft, sfft, td_to_dd_channel,
    wigner_receive,
};
