//! Experiment orchestration: windowing, normalization, the seq2seq and
//! single-step VAE architectures, training loops and rollouts.

mod config;
mod models;
mod normalize;
mod tasks;
mod train;
mod windows;

pub use config::{Profile, Task, TrainConfig};
pub use models::{BatchOutcome, Network, Seq2SeqModel, VaeOneStepModel};
pub use normalize::Normalizer;
pub use tasks::{ensemble_validation, kpp_split, prepare, PreparedData, VKS_FULL_TRAIN, VKS_FULL_VAL, VKS_STEADY_TRAIN, VKS_STEADY_VAL};
pub use train::{evaluate, rollout, train_observed, train_seq2seq, train_vae_onestep, EpochRecord, Metrics, TrainRun, TrainedModel};
pub use windows::{make_windows, make_windows_in, per_series_windows, Window, WindowDataset};
