use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fmt_f64, sym_eig, Matrix, SeededRng, GENERATOR_ID};

/// How the requested covariance spectrum is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "values")]
pub enum SpectrumRule {
    /// `λ_i = 2^{d−i}`; every subset of eigenvalues has a distinct sum.
    PowersOfTwo,
    /// `λ_i = d − i + 1`
    Linear,
    Explicit(Vec<f64>),
}

impl SpectrumRule {
    /// Eigenvalues in strictly decreasing order.
    pub fn eigenvalues(&self, d: usize) -> Result<Vec<f64>> {
        let mut values = match self {
            SpectrumRule::PowersOfTwo => (1..=d).map(|i| 2f64.powi((d - i) as i32)).collect(),
            SpectrumRule::Linear => (1..=d).map(|i| (d - i + 1) as f64).collect(),
            SpectrumRule::Explicit(v) => {
                if v.len() != d {
                    return Err(Error::InvalidSpectrum(format!(
                        "{} eigenvalues for dimension {d}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if values.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalues must be positive and finite: {values:?}"
            )));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalues must be distinct: {values:?}"
            )));
        }
        Ok(values)
    }
}

/// Samples `X` (`d × N`), their second-moment matrix `Σ = XXᵀ/N` and its
/// spectrum.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub sigma: Matrix,
    /// Eigenvalues of `Σ`, strictly decreasing.
    pub spectrum: Vec<f64>,
    /// Column `i` is the eigenvector of `spectrum[i]`.
    pub eigenvectors: Matrix,
    /// Generation seed; `None` for datasets built from explicit samples.
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.x.cols()
    }

    /// Builds a dataset from explicit samples, taking the spectrum from an
    /// eigendecomposition of `Σ`.
    pub fn from_samples(x: Matrix) -> Result<Self> {
        let sigma = second_moment(&x);
        let eig = sym_eig(&sigma)?;
        let d = x.rows();
        let spectrum: Vec<f64> = eig.eigenvalues.iter().rev().copied().collect();
        let eigenvectors = Matrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, d - 1 - c)]);
        Ok(Self {
            x,
            sigma,
            spectrum,
            eigenvectors,
            seed: None,
        })
    }

    /// JSON manifest (d, N, spectrum, seed, generator id) with `X` and the
    /// eigenvector matrix.
    pub fn to_json(&self) -> String {
        let spectrum: Vec<String> = self.spectrum.iter().map(|v| fmt_f64(*v)).collect();
        let seed = self.seed.map_or("null".to_string(), |s| s.to_string());
        format!(
            "{{\"d\":{},\"n_samples\":{},\"spectrum\":[{}],\"seed\":{},\"generator\":{},\"x\":{},\"eigenvectors\":{}}}",
            self.dim(),
            self.n_samples(),
            spectrum.join(","),
            seed,
            serde_json::to_string(GENERATOR_ID).unwrap(),
            self.x.to_json(),
            self.eigenvectors.to_json()
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            d: usize,
            n_samples: usize,
            spectrum: Vec<f64>,
            seed: Option<u64>,
            x: serde_json::Value,
            eigenvectors: serde_json::Value,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let x = Matrix::from_json_value(doc.x)?;
        let eigenvectors = Matrix::from_json_value(doc.eigenvectors)?;
        if x.shape() != (doc.d, doc.n_samples)
            || eigenvectors.shape() != (doc.d, doc.d)
            || doc.spectrum.len() != doc.d
        {
            return Err(Error::dim("dataset document shapes are inconsistent"));
        }
        Ok(Self {
            sigma: second_moment(&x),
            x,
            spectrum: doc.spectrum,
            eigenvectors,
            seed: doc.seed,
        })
    }
}

fn second_moment(x: &Matrix) -> Matrix {
    x.matmul_t(x).scale(1.0 / x.cols() as f64)
}

/// Gram–Schmidt (applied twice) on the columns of `a`.
pub fn orthonormalize_columns(a: &Matrix) -> Matrix {
    let (n, k) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j)).collect();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let proj: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                let (done, rest) = cols.split_at_mut(j);
                for (y, x) in rest[0].iter_mut().zip(&done[i]) {
                    *y -= proj * x;
                }
            }
        }
        let nrm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(nrm > 0.0, "columns are linearly dependent");
        cols[j].iter_mut().for_each(|v| *v /= nrm);
    }
    Matrix::from_fn(n, k, |r, c| cols[c][r])
}

/// Haar-like random orthogonal matrix from orthonormalised Gaussian columns.
pub fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.normal());
    orthonormalize_columns(&g)
}

/// Generates `X = U·diag(√λ)·Z` with `U` random orthogonal and the rows of `Z`
/// orthonormal with norm `√N`, so that `XXᵀ/N = U·diag(λ)·Uᵀ` exactly up to
/// roundoff.
pub fn generate_dataset(d: usize, n_samples: usize, rule: &SpectrumRule, seed: u64) -> Result<Dataset> {
    if d < 2 {
        return Err(Error::invalid(format!("data dimension must be at least 2, got {d}")));
    }
    if n_samples < d {
        return Err(Error::invalid(format!(
            "need at least d = {d} samples, got {n_samples}"
        )));
    }
    let spectrum = rule.eigenvalues(d)?;
    let mut rng = SeededRng::with_stream(seed, 0);
    let u = random_orthogonal(d, &mut rng);
    let zt = Matrix::from_fn(n_samples, d, |_, _| rng.normal());
    let zt = orthonormalize_columns(&zt);
    let root_n = (n_samples as f64).sqrt();
    // X = U · diag(√λ) · Z, with Z = √N · ztᵀ
    let scaled_u = Matrix::from_fn(d, d, |r, c| u[(r, c)] * spectrum[c].sqrt() * root_n);
    let x = scaled_u.matmul_t(&zt);
    let sigma = second_moment(&x);
    Ok(Dataset {
        x,
        sigma,
        spectrum,
        eigenvectors: u,
        seed: Some(seed),
    })
}

/// Sums of every subset of `values` with at most `max_size` elements.
#[cfg(test)]
pub(crate) fn subset_sums(values: &[f64], max_size: usize) -> Vec<f64> {
    let d = values.len();
    (0u32..(1 << d))
        .filter(|mask| mask.count_ones() as usize <= max_size)
        .map(|mask| (0..d).filter(|i| mask & (1 << i) != 0).map(|i| values[i]).sum())
        .collect()
}
