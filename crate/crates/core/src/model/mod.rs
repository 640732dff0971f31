//! The feature-constrained classifier: architecture, objective, λ
//! strategies, training loop, evaluation and checkpoints.

pub mod checkpoint;
mod config;
mod metrics;
mod network;
mod train;

pub use config::{lambda_schedule, LambdaStrategy, ModelConfig};
pub use metrics::{classification_metrics, minority_class, Metrics};
pub use network::{Forward, ModelInputs, Network, Prediction};
pub use train::{
    composite_loss, evaluate, feature_bandwidth, train, Checkpoint, EpochLog, Loss, TrainLog,
    TrainOutcome,
};
