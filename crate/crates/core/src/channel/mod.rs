//! Tapped-delay-line channel simulation for a mobile OTFS link.

mod diagnostics;
mod fading;
mod profile;
mod sequence;

pub use diagnostics::{
    dd_spread_grid, grid_correlation, sparsity_report, tf_response, top_energy_fraction,
    SparsityReport,
};
pub use fading::{generate_tap_gains, TapGainTrack, SINUSOIDS_PER_TAP};
pub use profile::{
    max_doppler, MobilityProfile, PowerDelayProfile, DEFAULT_SUBCARRIER_SPACING_HZ, EVA_DELAYS_NS,
    EVA_POWERS_DB, SPEED_OF_LIGHT,
};
pub use sequence::{
    build_htd, frame_duration, generate_sequence, sample_rate, ChannelSequence, SequenceMeta,
};
