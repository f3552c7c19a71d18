use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::ModelKind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    VksSteadyVae,
    VksFullSeq,
    KppSeq,
    EulerParamSeq,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::VksSteadyVae, Task::VksFullSeq, Task::KppSeq, Task::EulerParamSeq];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::VksSteadyVae => "vks_steady_vae",
            Task::VksFullSeq => "vks_full_seq",
            Task::KppSeq => "kpp_seq",
            Task::EulerParamSeq => "euler_param_seq",
        }
    }

    pub fn is_vae(self) -> bool {
        self == Task::VksSteadyVae
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vks_steady_vae" | "vks-steady" | "vks_steady" => Ok(Task::VksSteadyVae),
            "vks_full_seq" | "vks-full" | "vks_full" | "vks" => Ok(Task::VksFullSeq),
            "kpp_seq" | "kpp" => Ok(Task::KppSeq),
            "euler_param_seq" | "euler" => Ok(Task::EulerParamSeq),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Problem size: `desk` is the fast default, `paper` the full scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }
}

/// Everything a training run depends on. Together with the data, a config
/// determines the run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelKind,
    /// POD modes fed to the network.
    pub r: usize,
    /// Width of `h` (and of `m` for second-order models).
    pub latent: usize,
    /// Affine layers of the vector-field network.
    pub layers: usize,
    /// Hidden width of the vector-field network.
    pub hidden: usize,
    pub seq_in: usize,
    pub seq_out: usize,
    /// GRU width of the sequence encoder and decoder.
    pub rnn_units: usize,
    /// VAE encoder head: affine layers and width.
    pub encoder_layers: usize,
    pub encoder_units: usize,
    /// VAE decoder MLP: affine layers and width.
    pub decoder_layers: usize,
    pub decoder_units: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub rtol: f64,
    pub atol: f64,
    pub seed: u64,
    pub kl_weight: f64,
    /// Sample the VAE latent during training (`false` uses the mean).
    pub vae_noise: bool,
    /// Windows per gradient step; `None` means the full training set.
    pub batch_size: Option<usize>,
    /// Clip the global gradient norm to this value when set.
    pub grad_clip: Option<f64>,
    /// Upper bound on the damping `γ = ε·sigmoid(ω)`.
    pub epsilon: f64,
    /// Integrator step budget per sweep.
    pub max_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(Task::KppSeq, ModelKind::Hbnode, Profile::Desk)
    }
}

impl TrainConfig {
    /// Hyperparameters for a task; `Desk` shortens the long schedules.
    pub fn preset(task: Task, model: ModelKind, profile: Profile) -> Self {
        let base = Self {
            task,
            model,
            r: 8,
            latent: 8,
            layers: 2,
            hidden: 64,
            seq_in: 4,
            seq_out: 1,
            rnn_units: 16,
            encoder_layers: 4,
            encoder_units: 10,
            decoder_layers: 4,
            decoder_units: 41,
            lr: 0.01,
            weight_decay: 0.01,
            epochs: 500,
            rtol: 1e-8,
            atol: 1e-10,
            seed: 1,
            kl_weight: 1e-3,
            vae_noise: true,
            batch_size: None,
            grad_clip: None,
            epsilon: 1.0,
            max_steps: 100_000,
        };
        let desk = profile == Profile::Desk;
        match task {
            Task::VksSteadyVae => Self {
                latent: 6,
                layers: 12,
                hidden: 20,
                seq_in: 1,
                seq_out: 1,
                lr: 0.00153,
                epochs: if desk { 200 } else { 2000 },
                ..base
            },
            Task::VksFullSeq => Self {
                layers: 12,
                hidden: 64,
                seq_in: 9,
                seq_out: 1,
                lr: 0.001,
                epochs: if desk { 100 } else { 500 },
                ..base
            },
            Task::KppSeq => Self { layers: 2, hidden: 64, seq_in: 4, seq_out: 1, lr: 0.01, epochs: if desk { 100 } else { 500 }, ..base },
            Task::EulerParamSeq => Self {
                layers: 6,
                hidden: 16,
                seq_in: 150,
                seq_out: 30,
                lr: 0.01,
                epochs: 100,
                batch_size: Some(16),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r", self.r),
            ("latent", self.latent),
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("seq_in", self.seq_in),
            ("seq_out", self.seq_out),
            ("rnn_units", self.rnn_units),
            ("encoder_layers", self.encoder_layers),
            ("encoder_units", self.encoder_units),
            ("decoder_layers", self.decoder_layers),
            ("decoder_units", self.decoder_units),
            ("epochs", self.epochs),
            ("max_steps", self.max_steps),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        let rates = [("lr", self.lr), ("rtol", self.rtol), ("atol", self.atol), ("epsilon", self.epsilon)];
        if let Some((name, v)) = rates.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if !(self.weight_decay >= 0.0 && self.kl_weight >= 0.0) {
            return Err(Error::Config("weight decay and KL weight must be non-negative".into()));
        }
        if self.batch_size == Some(0) || self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("batch size and gradient clip must be positive when set".into()));
        }
        if self.task.is_vae() && self.seq_in != 1 {
            return Err(Error::Config("the VAE task maps one step to the next (seq_in = 1)".into()));
        }
        Ok(())
    }
}
