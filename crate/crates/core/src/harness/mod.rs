//! Metrics, evaluation protocol, sweeps, benchmarks and the persistence
//! and configuration helpers used by the command-line tool.

mod config;
mod csv;
mod eval;
mod metrics;
mod persist;
mod sweep;

pub use config::KeyValueConfig;
pub use csv::{csv_row, format_g6, write_csv, CSV_HEADER};
pub use eval::{bench, evaluate};
pub use metrics::{compute_mae, compute_rmse, MetricsReport};
pub use persist::{
    load_predictor, predictor_from_params, predictor_params, save_predictor, train_predictor, AnyPredictor,
    PredictorKind, TrainSettings,
};
pub use sweep::{speed_seed, sweep_history, sweep_horizon, sweep_speed, SpeedSweepSpec, SweepAxis, SweepResult};
