//! Dense linear algebra and the inner solvers used by the finders.

mod eig;
mod matrix;
mod minres;
mod rng;
mod steihaug;

pub use eig::{sym_eig, SymEigResult};
pub use matrix::{fmt_f64, Matrix};
pub use minres::{minres, MinresFlag, MinresOutcome};
pub use rng::{SeededRng, GENERATOR_ID};
pub use steihaug::{steihaug_cg, SteihaugStep};

/// Euclidean inner product of two coordinate lists.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y ← y + alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}
