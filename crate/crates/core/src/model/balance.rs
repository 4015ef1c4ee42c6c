//! Gauge balancing of adjacent layers.
//!
//! For invertible `C`, replacing `(W_k, W_{k+1})` by `(C W_k, W_{k+1} C⁻¹)`
//! leaves the end-to-end map, and hence the loss, unchanged. At a critical
//! point the Hessians of the two parameter settings are congruent, so index
//! and nullity agree; balancing (`W_k W_kᵀ = W_{k+1}ᵀ W_{k+1}`) picks the
//! best-conditioned member of the orbit.

use crate::linalg::{sym_eig, Matrix};

use super::NetworkParams;

/// Hidden Gram matrices with a condition number above this are left alone.
const MAX_GRAM_CONDITION: f64 = 1e12;
const MAX_SWEEPS: usize = 100;

/// `f(S)` for symmetric positive definite `S` via its eigendecomposition.
fn spd_function(s: &Matrix, f: impl Fn(f64) -> f64) -> Option<Matrix> {
    let eig = sym_eig(&s.symmetrized()).ok()?;
    let q = &eig.eigenvectors;
    let n = eig.eigenvalues.len();
    let values: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
    let scaled = Matrix::from_fn(n, n, |i, j| q[(i, j)] * values[j]);
    Some(scaled.matmul_t(q))
}

fn condition(s: &Matrix) -> f64 {
    match sym_eig(&s.symmetrized()) {
        Ok(eig) => {
            let lo = eig.eigenvalues[0];
            let hi = *eig.eigenvalues.last().unwrap();
            if lo <= 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Relative imbalance `‖W_k W_kᵀ − W_{k+1}ᵀ W_{k+1}‖ / ‖W_k W_kᵀ‖`, maximised
/// over hidden layers.
pub fn imbalance(params: &NetworkParams) -> f64 {
    let layers = params.layers();
    (0..layers.len() - 1)
        .map(|k| {
            let a = layers[k].matmul_t(&layers[k]);
            let b = layers[k + 1].t_matmul(&layers[k + 1]);
            a.sub(&b).frobenius_norm() / a.frobenius_norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Balances every hidden layer, or returns `None` when some hidden Gram
/// matrix is (numerically) singular and no invertible gauge exists.
pub fn balance(params: &NetworkParams) -> Option<NetworkParams> {
    let mut layers = params.layers().to_vec();
    let hidden = layers.len() - 1;
    for _ in 0..MAX_SWEEPS {
        for k in 0..hidden {
            let a = layers[k].matmul_t(&layers[k]);
            let b = layers[k + 1].t_matmul(&layers[k + 1]);
            if condition(&a) > MAX_GRAM_CONDITION || condition(&b) > MAX_GRAM_CONDITION {
                return None;
            }
            // G A G = B  ⇒  G = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2},  C = G^{1/2}
            let a_half = spd_function(&a, f64::sqrt)?;
            let a_inv_half = spd_function(&a, |l| 1.0 / l.sqrt())?;
            let mid = spd_function(&a_half.matmul(&b).matmul(&a_half), f64::sqrt)?;
            let g = a_inv_half.matmul(&mid).matmul(&a_inv_half);
            let c = spd_function(&g, f64::sqrt)?;
            let c_inv = spd_function(&g, |l| 1.0 / l.sqrt())?;
            layers[k] = c.matmul(&layers[k]);
            layers[k + 1] = layers[k + 1].matmul(&c_inv);
        }
        let current = NetworkParams::new(params.arch().clone(), layers.clone()).ok()?;
        if hidden == 1 || imbalance(&current) < 1e-10 {
            return Some(current);
        }
    }
    NetworkParams::new(params.arch().clone(), layers).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;
    use crate::model::{generate_dataset, loss, Architecture, SpectrumRule};

    #[test]
    fn balancing_preserves_the_map() {
        let data = generate_dataset(5, 10, &SpectrumRule::Linear, 1).unwrap();
        for widths in [vec![5, 3, 5], vec![5, 3, 3, 3, 5]] {
            let arch = Architecture::new(widths).unwrap();
            let mut rng = SeededRng::new(4);
            let p = NetworkParams::random(&arch, 1.0, &mut rng);
            let b = balance(&p).unwrap();
            assert!(imbalance(&b) < 1e-8, "{}", imbalance(&b));
            let l0 = loss(&p, &data).unwrap();
            assert!((loss(&b, &data).unwrap() - l0).abs() <= 1e-12 * l0.max(1.0));
        }
    }

    #[test]
    fn singular_hidden_layer_is_left_alone() {
        let arch = Architecture::new(vec![3, 2, 3]).unwrap();
        assert!(balance(&NetworkParams::zeros(&arch)).is_none());
        // a 4-wide layer feeding a 3-wide one has a rank-deficient Gram matrix
        let arch = Architecture::new(vec![5, 4, 3, 5]).unwrap();
        let p = NetworkParams::random(&arch, 1.0, &mut SeededRng::new(0));
        assert!(balance(&p).is_none());
    }
}
