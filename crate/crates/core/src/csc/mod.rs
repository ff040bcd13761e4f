//! Filter banks, feature maps and the alternating learner.

mod bank;
mod config;
mod train;

pub use bank::{FeatureMaps, FilterBank};
pub use config::{PenaltySpec, TrainConfig, TrainConfigBuilder, DEFAULT_BASELINE_ETA};
pub use train::{
    encode, f_step, f_step_batch, penalty_value, reconstruct, resolve_penalty, total_cost, total_cost_batch, train,
    z_step, z_step_batch, Cost, IterationRecord, StepOutcome, TrainReport,
};
