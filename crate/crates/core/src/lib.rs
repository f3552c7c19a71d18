//! Reduced-order modeling of PDE snapshot data with heavy-ball neural ODEs.
//!
//! The crate is organized bottom-up:
//!
//! - [`numkit`]: dense matrices, Jacobi eigendecomposition and SVD, and a
//!   Hessenberg QR eigenvalue solver for non-symmetric matrices.
//! - [`fom`]: finite-volume solvers (KPP with WENO-5/LLF, 1D Euler with HLL)
//!   and a synthetic vortex-street surrogate.
//! - [`rom`]: centering, POD, relative information content, lifted DMD.
//! - [`odeint`]: Dormand–Prince 5(4) with dense output and NFE accounting,
//!   finite-difference Jacobians and stiffness estimates.
//! - [`neural`]: MLP, GRU, VAE head and AdamW with hand-written VJPs.
//! - [`dynamics`]: NODE / HBNODE / GHBNODE vector fields, the adjoint
//!   gradient, and linearized spectral utilities.
//! - [`pipeline`]: windowing, the seq2seq and VAE architectures, training
//!   loops and rollouts.
//! - [`io`]: snapshot, checkpoint and metrics file formats.

pub mod dynamics;
pub mod error;
pub mod fom;
pub mod io;
pub mod neural;
pub mod numkit;
pub mod odeint;
pub mod pipeline;
pub mod rom;

pub use error::{Error, Result};
