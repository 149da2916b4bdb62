//! Softmax-network estimator: features, forward pass, NAG training with
//! early stopping, and probe-based parameter tuning.

pub mod features;
pub mod model;
pub mod stopping;
pub mod train;
pub mod tune;

pub use features::{CategoricalAttribute, FeatureConfig, NumericTransform};
pub use model::{load_model, save_model, Metamodel};
pub use stopping::{centered_moving_average, detect_stopping, rel_err_stop};
pub use train::{
    batch_loss, gradient, momentum_coeff, nag_step, train, HistoryRecord, StopReason, TrainConfig,
    TrainState, TrainingData,
};
pub use tune::{auto_tune, classify_stability, count_major_extrema, TunedParameters};
