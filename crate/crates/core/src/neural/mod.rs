//! Differentiable building blocks with hand-written reverse-mode products:
//! MLPs, GRU cells, a VAE sampling head and the AdamW optimizer.

mod adamw;
mod gru;
mod mlp;
mod vae;

pub use adamw::{adamw_step, clip_global_norm, AdamWConfig, AdamWState, ParamBlock};
pub use gru::{gru_step, GruParams, GruTape};
pub use mlp::{mlp_forward, mlp_vjp, sigmoid, softplus, Activation, MlpParams, MlpTape};
pub use vae::{kl_divergence, vae_sample, VaeHead, VaeTape, LOGVAR_BOUND};
