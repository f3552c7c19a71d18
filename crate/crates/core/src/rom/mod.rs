//! Snapshot reduction: centering, POD, information content, reconstruction
//! and lifted DMD.

mod dmd;
mod lift;
mod pod;

pub use dmd::{dmd_fit, dmd_predict, one_step_error, DmdModel};
pub use lift::{lift, LiftFn, LiftSpec};
pub use pod::{
    center_snapshots, pod_fit, pod_fit_matrix, pod_from_snapshots, pod_reconstruct, relative_info, PodBasis,
};
