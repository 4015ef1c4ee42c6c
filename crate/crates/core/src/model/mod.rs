//! The deep linear autoencoder `x ↦ W_L ··· W_1 x` under squared reconstruction
//! error.

mod balance;
mod data;
mod network;
mod objective;

pub use balance::{balance, imbalance};
pub use data::{generate_dataset, orthonormalize_columns, random_orthogonal, Dataset, SpectrumRule};
pub use network::{Architecture, NetworkParams};
pub use objective::{
    gradient, hessian, hessian_with_cap, hvp, loss, sq_grad_norm, HessianAssembly, HESSIAN_CAP,
};
