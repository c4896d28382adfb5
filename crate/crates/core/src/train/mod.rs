//! Sequential keyframe / residual optimization.

mod adam;
mod config;
mod log;
mod loss;
mod sequence;
mod stage;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use config::{lambda_schedule, TrainConfig};
pub use log::{read_csv, write_csv, LogRow, Stage};
pub use loss::{l1_loss_grad, total_loss};
pub use sequence::{
    evaluate_frame, evaluate_gof, gof_partition, train_gof, train_sequence, train_sequence_with,
    FrameReport, GofResult, SequenceResult,
};
pub use stage::{
    fit_entropy_models, init_keyframe, train_keyframe, train_residual_frame, FrameTargets,
    KeyframeBuffer, KeyframeOutput, ResidualState,
};
