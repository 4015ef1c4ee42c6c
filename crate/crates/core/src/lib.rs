//! Numerical recovery and classification of the critical points of a deep
//! linear autoencoder.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] dense matrices, a Jacobi eigensolver, MINRES, Steihaug-CG and
//!   the seeded random stream shared by every stage.
//! * [`model`] the autoencoder itself: data generation, loss, gradient, exact
//!   Hessian-vector products and Hessian assembly.
//! * [`catalog`] the analytic critical points (one per eigenvector subset)
//!   with their losses and numerically certified Morse indices.
//! * [`finders`] gradient-norm minimisation, Newton-MR and Newton-TR, all
//!   driving `g = ½‖∇L‖²` to zero.
//! * [`sampler`] gradient-descent trajectories and finder start points.
//! * [`experiment`] the configuration-driven pipeline, matching and the CSV
//!   outputs.

pub mod catalog;
pub mod error;
pub mod experiment;
pub mod finders;
pub mod linalg;
pub mod model;
pub mod sampler;

pub use error::{Error, Result};
