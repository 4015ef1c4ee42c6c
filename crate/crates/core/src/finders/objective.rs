use crate::linalg::Matrix;
use crate::model::{self, Architecture, Dataset, NetworkParams};

/// A twice-differentiable loss on flat coordinates, seen by the finders only
/// through values, gradients and Hessian-vector products.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// The autoencoder loss on flattened parameters.
#[derive(Debug, Clone, Copy)]
pub struct DlaeObjective<'a> {
    pub arch: &'a Architecture,
    pub data: &'a Dataset,
}

impl<'a> DlaeObjective<'a> {
    pub fn new(arch: &'a Architecture, data: &'a Dataset) -> Self {
        Self { arch, data }
    }

    fn params(&self, x: &[f64]) -> NetworkParams {
        NetworkParams::from_flat(self.arch, x).expect("finder iterates keep the parameter count")
    }
}

impl Objective for DlaeObjective<'_> {
    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        model::loss(&self.params(x), self.data).expect("architecture matches data")
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        model::gradient(&self.params(x), self.data)
            .expect("architecture matches data")
            .flatten()
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        model::hvp(&self.params(x), &self.params(v), self.data)
            .expect("architecture matches data")
            .flatten()
    }
}

/// `L(x) = ½ xᵀ A x − bᵀ x` with constant Hessian `A`; a sanity hook for the
/// Newton-type finders.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let ax = self.a.matvec(x);
        0.5 * crate::linalg::dot(x, &ax) - crate::linalg::dot(&self.b, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.matvec(x);
        crate::linalg::axpy(-1.0, &self.b, &mut g);
        g
    }

    fn hvp(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.a.matvec(v)
    }
}

/// `L(θ) = θ³/3`, whose squared gradient norm is `g(θ) = ½θ⁴`: a degenerate
/// one-dimensional critical point at zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarCubic;

impl Objective for ScalarCubic {
    fn dim(&self) -> usize {
        1
    }

    fn loss(&self, x: &[f64]) -> f64 {
        x[0].powi(3) / 3.0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0]]
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        vec![2.0 * x[0] * v[0]]
    }
}
