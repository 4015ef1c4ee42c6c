//! Loss, gradient, Hessian-vector products and Hessian assembly.
//!
//! With `W = W_L···W_1`, `E = W − I`, `M = EΣ`, and for layer `i` the partial
//! products `A_i = W_L···W_{i+1}` and `B_i = W_{i−1}···W_1`:
//!
//! ```text
//! L(θ)      = ½ tr(E Σ Eᵀ)
//! ∇_i L     = A_iᵀ M B_iᵀ
//! ∇²L[V]_i  = dA_iᵀ M B_iᵀ + A_iᵀ (dW Σ) B_iᵀ + A_iᵀ M dB_iᵀ
//! ```
//!
//! where `dW`, `dA_i`, `dB_i` are the directional derivatives of the products
//! along `V`. Everything is closed form; nothing here differentiates
//! numerically.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{Dataset, NetworkParams};

/// Largest parameter count for which [`hessian`] assembles a dense matrix.
pub const HESSIAN_CAP: usize = 2048;

/// Table of partial products; `None` stands for an identity.
struct Chains {
    // chains[lo][hi - lo] = W_{hi}···W_{lo+1} (layers lo..hi, 0-based, half-open)
    table: Vec<Vec<Option<Matrix>>>,
    depth: usize,
}

impl Chains {
    fn new(params: &NetworkParams) -> Self {
        let depth = params.layers().len();
        let table = (0..=depth)
            .map(|lo| {
                let mut row: Vec<Option<Matrix>> = vec![None];
                for hi in lo..depth {
                    let next = match row.last().unwrap() {
                        None => params.layer(hi).clone(),
                        Some(prev) => params.layer(hi).matmul(prev),
                    };
                    row.push(Some(next));
                }
                row
            })
            .collect();
        Self { table, depth }
    }

    /// Product of layers `lo..hi` (later layers on the left).
    fn get(&self, lo: usize, hi: usize) -> Option<&Matrix> {
        self.table[lo][hi - lo].as_ref()
    }

    fn after(&self, i: usize) -> Option<&Matrix> {
        self.get(i + 1, self.depth)
    }

    fn before(&self, i: usize) -> Option<&Matrix> {
        self.get(0, i)
    }

    fn end_to_end(&self) -> Option<&Matrix> {
        self.get(0, self.depth)
    }
}

fn left(a: Option<&Matrix>, m: Matrix) -> Matrix {
    a.map_or(m.clone(), |a| a.matmul(&m))
}

fn right(m: Matrix, b: Option<&Matrix>) -> Matrix {
    match b {
        None => m,
        Some(b) => m.matmul(b),
    }
}

fn left_t(a: Option<&Matrix>, m: Matrix) -> Matrix {
    match a {
        None => m,
        Some(a) => a.t_matmul(&m),
    }
}

fn right_t(m: Matrix, b: Option<&Matrix>) -> Matrix {
    match b {
        None => m,
        Some(b) => m.matmul_t(b),
    }
}

fn check(params: &NetworkParams, data: &Dataset) -> Result<()> {
    if params.arch().dim() != data.dim() {
        return Err(Error::dim(format!(
            "network dimension {} does not match data dimension {}",
            params.arch().dim(),
            data.dim()
        )));
    }
    Ok(())
}

fn residual(chains: &Chains, d: usize) -> Matrix {
    let mut e = chains
        .end_to_end()
        .cloned()
        .unwrap_or_else(|| Matrix::identity(d));
    for i in 0..d {
        e[(i, i)] -= 1.0;
    }
    e
}

/// `½ tr((W − I) Σ (W − I)ᵀ)`
pub fn loss(params: &NetworkParams, data: &Dataset) -> Result<f64> {
    check(params, data)?;
    let chains = Chains::new(params);
    let e = residual(&chains, data.dim());
    Ok(0.5 * e.matmul(&data.sigma).frobenius_dot(&e))
}

pub fn gradient(params: &NetworkParams, data: &Dataset) -> Result<NetworkParams> {
    check(params, data)?;
    let chains = Chains::new(params);
    Ok(gradient_with(&chains, params, data))
}

fn gradient_with(chains: &Chains, params: &NetworkParams, data: &Dataset) -> NetworkParams {
    let m = residual(chains, data.dim()).matmul(&data.sigma);
    let layers = (0..chains.depth)
        .map(|i| left_t(chains.after(i), right_t(m.clone(), chains.before(i))))
        .collect();
    NetworkParams::new(params.arch().clone(), layers).expect("gradient shapes follow the architecture")
}

/// Exact Hessian-vector product `∇²L(θ)·V`.
pub fn hvp(params: &NetworkParams, direction: &NetworkParams, data: &Dataset) -> Result<NetworkParams> {
    check(params, data)?;
    direction.check_arch(params.arch())?;
    let chains = Chains::new(params);
    Ok(hvp_with(&chains, params, direction, data))
}

fn hvp_with(
    chains: &Chains,
    params: &NetworkParams,
    direction: &NetworkParams,
    data: &Dataset,
) -> NetworkParams {
    let depth = chains.depth;
    let d = data.dim();
    let m = residual(chains, d).matmul(&data.sigma);
    let v = direction.layers();

    // dW = Σ_j A_j V_j B_j
    let mut dw = Matrix::zeros(d, d);
    for j in 0..depth {
        dw.add_assign(&left(chains.after(j), right(v[j].clone(), chains.before(j))));
    }
    let dw_sigma = dw.matmul(&data.sigma);

    let layers = (0..depth)
        .map(|i| {
            let (rows, cols) = params.arch().layer_shape(i);
            let mut out = left_t(chains.after(i), right_t(dw_sigma.clone(), chains.before(i)));

            // dA_i = Σ_{j>i} (W_L···W_{j+1}) V_j (W_{j−1}···W_{i+1}),  d × n_i
            if i + 1 < depth {
                let mut da = Matrix::zeros(d, rows);
                for j in (i + 1)..depth {
                    da.add_assign(&left(chains.after(j), right(v[j].clone(), chains.get(i + 1, j))));
                }
                out.add_assign(&da.t_matmul(&right_t(m.clone(), chains.before(i))));
            }
            // dB_i = Σ_{j<i} (W_{i−1}···W_{j+1}) V_j (W_{j−1}···W_1),  n_{i−1} × d
            if i > 0 {
                let mut db = Matrix::zeros(cols, d);
                for j in 0..i {
                    db.add_assign(&left(chains.get(j + 1, i), right(v[j].clone(), chains.before(j))));
                }
                out.add_assign(&left_t(chains.after(i), m.matmul_t(&db)));
            }
            out
        })
        .collect();
    NetworkParams::new(params.arch().clone(), layers).expect("hvp shapes follow the architecture")
}

/// `g(θ) = ½‖∇L(θ)‖²`
pub fn sq_grad_norm(params: &NetworkParams, data: &Dataset) -> Result<f64> {
    let g = gradient(params, data)?;
    Ok(0.5 * g.dot(&g))
}

/// Dense Hessian together with its asymmetry before symmetrisation.
#[derive(Debug, Clone)]
pub struct HessianAssembly {
    pub matrix: Matrix,
    /// `max|H − Hᵀ|` of the column-wise assembly, before symmetrising.
    pub raw_asymmetry: f64,
}

/// Dense Hessian, column `j` being the HVP along the `j`-th coordinate
/// direction, symmetrised as `(H + Hᵀ)/2`.
pub fn hessian(params: &NetworkParams, data: &Dataset) -> Result<Matrix> {
    Ok(hessian_with_cap(params, data, HESSIAN_CAP)?.matrix)
}

pub fn hessian_with_cap(params: &NetworkParams, data: &Dataset, cap: usize) -> Result<HessianAssembly> {
    check(params, data)?;
    let arch = params.arch();
    let p = arch.param_count();
    if p > cap {
        return Err(Error::Size(format!(
            "Hessian would be {p}x{p} (cap {cap}); reduce the layer widths or depth"
        )));
    }
    let chains = Chains::new(params);
    let mut h = Matrix::zeros(p, p);
    let mut basis = vec![0.0; p];
    for j in 0..p {
        basis[j] = 1.0;
        let e = NetworkParams::from_flat(arch, &basis)?;
        basis[j] = 0.0;
        let col = hvp_with(&chains, params, &e, data).flatten();
        for (i, v) in col.into_iter().enumerate() {
            h[(i, j)] = v;
        }
    }
    let raw_asymmetry = h.max_asymmetry();
    Ok(HessianAssembly {
        matrix: h.symmetrized(),
        raw_asymmetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eig, SeededRng};
    use crate::model::{generate_dataset, Architecture, SpectrumRule};

    fn diag_data(values: &[f64]) -> Dataset {
        // X = diag(√(2λ)) with N = 2... simpler: N = d, X = √d · diag(√λ)
        let d = values.len() as f64;
        let x = Matrix::diag(&values.iter().map(|l| (l * d).sqrt()).collect::<Vec<_>>());
        Dataset::from_samples(x).unwrap()
    }

    /// Independent oracle: (1/2N) Σ_n ‖W x_n − x_n‖².
    fn sample_sum_loss(params: &NetworkParams, data: &Dataset) -> f64 {
        let mut w = params.layer(0).clone();
        for l in &params.layers()[1..] {
            w = l.matmul(&w);
        }
        let n = data.n_samples();
        let mut total = 0.0;
        for s in 0..n {
            let x = data.x.column(s);
            let wx = w.matvec(&x);
            total += wx.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        total / (2.0 * n as f64)
    }

    fn finite_difference_gradient(params: &NetworkParams, data: &Dataset) -> Vec<f64> {
        let arch = params.arch();
        let theta = params.flatten();
        let h = 1e-5 * params.max_abs().max(1.0);
        (0..theta.len())
            .map(|k| {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[k] += h;
                minus[k] -= h;
                let lp = loss(&NetworkParams::from_flat(arch, &plus).unwrap(), data).unwrap();
                let lm = loss(&NetworkParams::from_flat(arch, &minus).unwrap(), data).unwrap();
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
        diff / scale
    }

    fn instance(widths: Vec<usize>, seed: u64) -> (NetworkParams, Dataset) {
        let arch = Architecture::new(widths).unwrap();
        let data = generate_dataset(arch.dim(), 3 * arch.dim(), &SpectrumRule::Linear, seed).unwrap();
        let mut rng = SeededRng::new(seed + 100);
        (NetworkParams::random(&arch, 1.0, &mut rng), data)
    }

    #[test]
    fn identity_network_is_a_zero_loss_critical_point() {
        let arch = Architecture::new(vec![3, 3, 3]).unwrap();
        let data = generate_dataset(3, 5, &SpectrumRule::Linear, 0).unwrap();
        let id = NetworkParams::identity(&arch).unwrap();
        assert!(loss(&id, &data).unwrap().abs() < 1e-14);
        assert!(gradient(&id, &data).unwrap().max_abs() < 1e-13);
        assert!(sq_grad_norm(&id, &data).unwrap() < 1e-26);
    }

    #[test]
    fn zero_network_loss_is_half_trace() {
        let arch = Architecture::new(vec![2, 2, 2]).unwrap();
        let data = diag_data(&[2.0, 1.0]);
        let z = NetworkParams::zeros(&arch);
        assert!((loss(&z, &data).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(gradient(&z, &data).unwrap().max_abs(), 0.0);
        assert_eq!(sq_grad_norm(&z, &data).unwrap(), 0.0);
    }

    #[test]
    fn loss_matches_sample_sum() {
        let (params, data) = instance(vec![4, 3, 2, 4], 3);
        let a = loss(&params, &data).unwrap();
        let b = sample_sum_loss(&params, &data);
        assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (params, data) = instance(vec![3, 3, 3], 5);
        let g = gradient(&params, &data).unwrap().flatten();
        let fd = finite_difference_gradient(&params, &data);
        assert!(rel_err(&g, &fd) <= 1e-6, "{}", rel_err(&g, &fd));
    }

    #[test]
    fn zero_direction_hvp() {
        let (params, data) = instance(vec![3, 2, 3], 8);
        let zero = NetworkParams::zeros(params.arch());
        assert_eq!(hvp(&params, &zero, &data).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn hvp_at_identity() {
        let arch = Architecture::new(vec![2, 2, 2]).unwrap();
        let data = diag_data(&[2.0, 1.0]);
        let id = NetworkParams::identity(&arch).unwrap();
        let v = NetworkParams::new(arch.clone(), vec![Matrix::identity(2), Matrix::zeros(2, 2)]).unwrap();
        let out = hvp(&id, &v, &data).unwrap();
        for layer in out.layers() {
            assert!(layer.sub(&Matrix::diag(&[2.0, 1.0])).max_abs() < 1e-14);
        }
    }

    #[test]
    fn hvp_matches_gradient_differences() {
        let (params, data) = instance(vec![4, 2, 3, 4], 12);
        let mut rng = SeededRng::new(99);
        let v = NetworkParams::random(params.arch(), 1.0, &mut rng);
        let h = 1e-5 * params.max_abs().max(1.0);
        let gp = gradient(&params.axpy(h, &v), &data).unwrap();
        let gm = gradient(&params.axpy(-h, &v), &data).unwrap();
        let fd = gp.axpy(-1.0, &gm).scale(1.0 / (2.0 * h)).flatten();
        let exact = hvp(&params, &v, &data).unwrap().flatten();
        assert!(rel_err(&exact, &fd) <= 1e-6, "{}", rel_err(&exact, &fd));
    }

    #[test]
    fn scalar_network_hessian() {
        // d = 1 is below the data generator's minimum, so build Σ = (1) by hand
        let data = Dataset::from_samples(Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let arch = Architecture::new(vec![1, 1, 1]).unwrap();
        let p = NetworkParams::from_flat(&arch, &[1.0, 1.0]).unwrap();
        let h = hessian(&p, &data).unwrap();
        assert_eq!(h, Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
        let p = NetworkParams::from_flat(&arch, &[0.5, 3.0]).unwrap();
        let h = hessian(&p, &data).unwrap();
        let (w1, w2) = (0.5, 3.0);
        let want = Matrix::from_rows(&[
            vec![w2 * w2, 2.0 * w1 * w2 - 1.0],
            vec![2.0 * w1 * w2 - 1.0, w1 * w1],
        ])
        .unwrap();
        assert!(h.sub(&want).max_abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_second_differences() {
        let (params, data) = instance(vec![3, 3, 3], 21);
        let arch = params.arch().clone();
        let asm = hessian_with_cap(&params, &data, HESSIAN_CAP).unwrap();
        assert!(asm.raw_asymmetry <= 1e-9 * asm.matrix.max_abs());
        let theta = params.flatten();
        let n = theta.len();
        assert_eq!(n, 18);
        let h = 1e-4;
        let f = |t: &[f64]| loss(&NetworkParams::from_flat(&arch, t).unwrap(), &data).unwrap();
        let mut fd = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut t = theta.clone();
                let mut at = |di: f64, dj: f64| {
                    t.copy_from_slice(&theta);
                    t[i] += di;
                    t[j] += dj;
                    f(&t)
                };
                fd[(i, j)] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            }
        }
        assert!(asm.matrix.sub(&fd).max_abs() <= 1e-5 * asm.matrix.max_abs().max(1.0));
    }

    #[test]
    fn hessian_cap_and_shape_errors() {
        let (params, data) = instance(vec![4, 3, 4], 2);
        assert!(matches!(hessian_with_cap(&params, &data, 10), Err(Error::Size(_))));
        let other = generate_dataset(3, 5, &SpectrumRule::Linear, 0).unwrap();
        assert!(matches!(loss(&params, &other), Err(Error::Dimension(_))));
        assert!(matches!(gradient(&params, &other), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_point_hessian_pairs() {
        let arch = Architecture::new(vec![2, 1, 2]).unwrap();
        let data = diag_data(&[2.0, 1.0]);
        let h = hessian(&NetworkParams::zeros(&arch), &data).unwrap();
        let eig = sym_eig(&h).unwrap();
        let want = [-2.0, -1.0, 1.0, 2.0];
        for (g, w) in eig.eigenvalues.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}
