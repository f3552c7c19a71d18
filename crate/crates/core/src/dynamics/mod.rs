//! Latent vector fields (NODE, HBNODE, GHBNODE), adjoint gradients and the
//! linearized spectral utilities behind the heavy-ball analysis.

mod adjoint;
mod linear;
mod model;

pub use adjoint::{adjoint_gradient, adjoint_gradient_jumps, forward_batch, AdjointConfig, AdjointResult, AdjointTrace};
pub use linear::{hb_companion, pairing_check, spectral_ratio};
pub use model::{FieldVjp, ModelKind, OdeModel};
