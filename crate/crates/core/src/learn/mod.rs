//! Model trainer, validator, and predictor.

pub mod mlp;
pub mod model;

pub use mlp::Mlp;
pub use model::{
    evaluate, forecast_rollout, make_examples, train_model, tune_and_train, validate_model,
    Checkpoint, Example, ForecastSet, Metrics, ModelArtifact, OutputMode, TrainConfig, TrainOutput,
    TuningGrid, Validation, ValidatorConfig, HORIZON,
};
