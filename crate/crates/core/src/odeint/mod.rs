//! Adaptive Dormand–Prince integration with evaluation counting, and
//! Jacobian-based stiffness estimates.

mod dopri5;
mod stiffness;

pub use dopri5::{dense_eval, dopri5_integrate, dopri5_sampled, Dopri5Config, Trajectory};
pub use stiffness::{jacobian_fd, spectrum_stiffness, stiffness_estimate, Stiffness};
