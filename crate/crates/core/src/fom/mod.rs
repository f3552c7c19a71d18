//! Full-order finite-volume solvers that generate snapshot data.

mod euler;
mod kpp;
mod snapshot;
mod synthetic;

pub use euler::{
    euler_initial, euler_initial_primitive, euler_simulate, euler_simulate_with_initial, hll_flux, ConservedState,
    EulerConfig, EulerParams, Primitive, GAMMA_GAS,
};
pub use kpp::{
    kpp_flux, kpp_initial, kpp_simulate, kpp_simulate_with_initial, llf_flux, total_variation, weno5_reconstruct,
    Grid2D, KppConfig, Reconstruction,
};
pub use snapshot::{Field, SnapshotSet, Source};
pub use synthetic::{synthetic_vks, SyntheticVksConfig};
