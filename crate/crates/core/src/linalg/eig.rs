use crate::error::{Error, Result};

use super::Matrix;

/// Eigendecomposition of a symmetric matrix: eigenvalues ascending, the
/// matching orthonormal eigenvectors stored as the columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SymEigResult {
    /// `Q·diag(λ)·Qᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let q = &self.eigenvectors;
        let n = self.eigenvalues.len();
        let mut scaled = q.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= self.eigenvalues[j];
            }
        }
        scaled.matmul_t(q)
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// The input is symmetrised as `(A + Aᵀ)/2` before rotating; asymmetry above
/// `1e-8·max|entry|` is rejected.
pub fn sym_eig(a: &Matrix) -> Result<SymEigResult> {
    if !a.is_square() {
        return Err(Error::dim(format!("sym_eig needs a square matrix, got {:?}", a.shape())));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sym_eig input has non-finite entries"));
    }
    let scale = a.max_abs();
    if a.max_asymmetry() > 1e-8 * scale {
        return Err(Error::invalid(format!(
            "sym_eig input is not symmetric (asymmetry {:.3e})",
            a.max_asymmetry()
        )));
    }

    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off == 0.0 || off.sqrt() <= 1e-18 * (diag + off).sqrt() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `m[p][q]`, accumulated into `v`.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let g = 100.0 * apq.abs();
    if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        m[(p, q)] = 0.0;
        m[(q, p)] = 0.0;
        return;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    // theta == 0 gives signum 1, i.e. a 45° rotation
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    if s == 0.0 {
        // the off-diagonal entry is negligible next to the diagonal gap
        m[(p, q)] = 0.0;
        m[(q, p)] = 0.0;
        return;
    }
    let tau = s / (1.0 + c);
    let n = m.rows();

    m[(p, p)] = app - t * apq;
    m[(q, q)] = aqq + t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = m[(r, p)];
        let arq = m[(r, q)];
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        m[(r, p)] = new_rp;
        m[(p, r)] = new_rp;
        m[(r, q)] = new_rq;
        m[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp - s * (vrq + tau * vrp);
        v[(r, q)] = vrq + s * (vrp - tau * vrq);
    }
}
