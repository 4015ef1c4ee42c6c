//! Ground-truth critical points.
//!
//! Every subset `I` of at most `p` covariance eigenvectors gives a critical
//! point whose end-to-end map is the orthogonal projector `U_I U_Iᵀ`, with loss
//! `½ Σ_{i∉I} λ_i`. One canonical factorisation per subset is built and its
//! Morse index read off the exact Hessian.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{fmt_f64, sym_eig, Matrix};
use crate::model::{hessian, Architecture, Dataset, NetworkParams};

/// Default relative threshold separating zero from nonzero curvature.
pub const DEFAULT_TAU_REL: f64 = 1e-6;

/// Range of `tau_rel` over which a catalog index must not change.
pub const TAU_STABILITY_RANGE: (f64, f64) = (1e-8, 1e-5);

/// Curvature counts of a point's Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub index: usize,
    pub nullity: usize,
    /// Absolute threshold actually used.
    pub tau: f64,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

impl Classification {
    pub fn positive(&self) -> usize {
        self.eigenvalues.len() - self.index - self.nullity
    }

    /// Index and nullity recounted from the stored eigenvalues at another
    /// relative threshold.
    pub fn recount(&self, tau_rel: f64) -> (usize, usize) {
        let tau = absolute_tau(&self.eigenvalues, tau_rel);
        count(&self.eigenvalues, tau)
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    /// 1-based eigenvalue ranks, ascending.
    pub subset: Vec<usize>,
    pub analytic_loss: f64,
    pub representative: NetworkParams,
    pub index: usize,
    pub nullity: usize,
    pub tau: f64,
    /// Index changed somewhere in [`TAU_STABILITY_RANGE`].
    pub index_unstable: bool,
}

impl CatalogEntry {
    pub fn rank(&self) -> usize {
        self.subset.len()
    }

    /// `"1;3"`, empty for the empty subset.
    pub fn subset_label(&self) -> String {
        subset_label(&self.subset)
    }
}

pub fn subset_label(subset: &[usize]) -> String {
    subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn parse_subset_label(label: &str) -> Result<Vec<usize>> {
    if label.is_empty() {
        return Ok(Vec::new());
    }
    label
        .split(';')
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad subset label {label:?}")))
        })
        .collect()
}

/// Key for the (loss, index) plane: loss rounded to 12 significant digits.
pub fn loss_key(loss: f64) -> String {
    format!("{loss:.11e}")
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
    /// Distinct `(rounded loss, index)` pairs.
    pub pairs: BTreeSet<(String, usize)>,
    pub tau_rel: f64,
}

impl Catalog {
    pub fn entry(&self, subset: &[usize]) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.subset == subset)
    }

    pub fn unstable_entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| e.index_unstable)
    }

    /// Writes `catalog.csv`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "subset,r,analytic_loss,index,nullity,tau")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.subset_label(),
                e.rank(),
                fmt_f64(e.analytic_loss),
                e.index,
                e.nullity,
                fmt_f64(e.tau)
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// All subsets of `{1..d}` with at most `p` elements, ordered by size and then
/// lexicographically.
pub fn enumerate_subsets(d: usize, p: usize) -> Result<Vec<Vec<usize>>> {
    if p > d {
        return Err(Error::invalid(format!("subset size bound {p} exceeds dimension {d}")));
    }
    let mut out = Vec::new();
    for r in 0..=p {
        let mut combo: Vec<usize> = (1..=r).collect();
        loop {
            out.push(combo.clone());
            // advance to the next r-combination in lexicographic order
            let mut k = r;
            while k > 0 && combo[k - 1] == d - r + k {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            combo[k - 1] += 1;
            for j in k..r {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// `½ Σ_{i∉I} λ_i`
pub fn analytic_loss(spectrum: &[f64], subset: &[usize]) -> f64 {
    0.5 * spectrum
        .iter()
        .enumerate()
        .filter(|(i, _)| !subset.contains(&(i + 1)))
        .map(|(_, l)| l)
        .sum::<f64>()
}

/// Canonical factorisation of `U_I U_Iᵀ` through identity selectors:
/// `W_1 = S_1 U_Iᵀ`, `W_j = S_j S_{j−1}ᵀ`, `W_L = U_I S_{L−1}ᵀ`.
pub fn build_representative(arch: &Architecture, data: &Dataset, subset: &[usize]) -> Result<NetworkParams> {
    let d = arch.dim();
    if data.dim() != d {
        return Err(Error::dim(format!(
            "architecture dimension {d} vs data dimension {}",
            data.dim()
        )));
    }
    let r = subset.len();
    if r > arch.bottleneck() {
        return Err(Error::InfeasibleSubset(format!(
            "subset {subset:?} has {r} elements but the bottleneck is {}",
            arch.bottleneck()
        )));
    }
    if subset.iter().any(|&i| i == 0 || i > d) || subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "subset {subset:?} must be strictly increasing ranks in 1..={d}"
        )));
    }
    let widths = arch.widths();
    let depth = arch.depth();
    // U_I: d × r; selectors S_k: n_k × r
    let u_cols: Vec<usize> = subset.iter().map(|i| i - 1).collect();
    let u_entry = |row: usize, k: usize| data.eigenvectors[(row, u_cols[k])];
    let layers = (0..depth)
        .map(|i| {
            let (rows, cols) = (widths[i + 1], widths[i]);
            if depth == 1 {
                unreachable!("architectures have depth at least two")
            } else if i == 0 {
                // S_1 U_Iᵀ
                Matrix::from_fn(rows, cols, |a, b| if a < r { u_entry(b, a) } else { 0.0 })
            } else if i == depth - 1 {
                // U_I S_{L−1}ᵀ
                Matrix::from_fn(rows, cols, |a, b| if b < r { u_entry(a, b) } else { 0.0 })
            } else {
                Matrix::from_fn(rows, cols, |a, b| if a == b && a < r { 1.0 } else { 0.0 })
            }
        })
        .collect();
    NetworkParams::new(arch.clone(), layers)
}

fn absolute_tau(eigenvalues: &[f64], tau_rel: f64) -> f64 {
    let max = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max <= tau_rel {
        tau_rel
    } else {
        tau_rel * max
    }
}

fn count(eigenvalues: &[f64], tau: f64) -> (usize, usize) {
    let index = eigenvalues.iter().filter(|&&l| l < -tau).count();
    let nullity = eigenvalues.iter().filter(|&&l| l.abs() <= tau).count();
    (index, nullity)
}

/// Morse index and nullity from the exact Hessian, with the zero threshold
/// `tau = tau_rel · max|eigenvalue|`.
pub fn classify_point(params: &NetworkParams, data: &Dataset, tau_rel: f64) -> Result<Classification> {
    if !(tau_rel > 0.0) {
        return Err(Error::invalid(format!("tau_rel must be positive, got {tau_rel}")));
    }
    let h = hessian(params, data)?;
    let eig = sym_eig(&h)?;
    let tau = absolute_tau(&eig.eigenvalues, tau_rel);
    let (index, nullity) = count(&eig.eigenvalues, tau);
    Ok(Classification {
        index,
        nullity,
        tau,
        eigenvalues: eig.eigenvalues,
    })
}

/// One entry per feasible subset, classified at its canonical representative.
pub fn build_catalog(arch: &Architecture, data: &Dataset, tau_rel: f64) -> Result<Catalog> {
    let subsets = enumerate_subsets(arch.dim(), arch.bottleneck())?;
    let entries = subsets
        .into_par_iter()
        .map(|subset| {
            let representative = build_representative(arch, data, &subset)?;
            let class = classify_point(&representative, data, tau_rel)?;
            let (lo, hi) = TAU_STABILITY_RANGE;
            let index_unstable = class.recount(lo).0 != class.index || class.recount(hi).0 != class.index;
            if index_unstable {
                log::warn!(
                    "catalog entry {{{}}} changes index across tau_rel in [{lo:e}, {hi:e}]",
                    subset_label(&subset)
                );
            }
            Ok(CatalogEntry {
                analytic_loss: analytic_loss(&data.spectrum, &subset),
                subset,
                representative,
                index: class.index,
                nullity: class.nullity,
                tau: class.tau,
                index_unstable,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs = entries
        .iter()
        .map(|e| (loss_key(e.analytic_loss), e.index))
        .collect();
    Ok(Catalog {
        entries,
        pairs,
        tau_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_dataset, loss, sq_grad_norm, SpectrumRule};

    fn diag_data() -> Dataset {
        Dataset::from_samples(Matrix::diag(&[2.0, 2f64.sqrt()])).unwrap()
    }

    #[test]
    fn subset_enumeration() {
        let s = enumerate_subsets(3, 2).unwrap();
        let want: Vec<Vec<usize>> = vec![
            vec![],
            vec![1],
            vec![2],
            vec![3],
            vec![1, 2],
            vec![1, 3],
            vec![2, 3],
        ];
        assert_eq!(s, want);
        assert_eq!(enumerate_subsets(8, 4).unwrap().len(), 163);
        assert_eq!(enumerate_subsets(2, 0).unwrap(), vec![Vec::<usize>::new()]);
        assert_eq!(enumerate_subsets(4, 4).unwrap().len(), 16);
        assert!(enumerate_subsets(2, 3).is_err());
    }

    #[test]
    fn labels_round_trip() {
        assert_eq!(subset_label(&[1, 3]), "1;3");
        assert_eq!(subset_label(&[]), "");
        assert_eq!(parse_subset_label("1;3").unwrap(), vec![1, 3]);
        assert_eq!(parse_subset_label("").unwrap(), Vec::<usize>::new());
        assert!(parse_subset_label("1;x").is_err());
    }

    #[test]
    fn empty_subset_is_zero_network() {
        let arch = Architecture::new(vec![2, 1, 2]).unwrap();
        let data = diag_data();
        let rep = build_representative(&arch, &data, &[]).unwrap();
        assert_eq!(rep.max_abs(), 0.0);
        assert!((loss(&rep, &data).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn diagonal_two_by_one() {
        let arch = Architecture::new(vec![2, 1, 2]).unwrap();
        let data = diag_data();
        let rep = build_representative(&arch, &data, &[1]).unwrap();
        let w1 = rep.layer(0);
        let w2 = rep.layer(1);
        // eigenvectors of a diagonal Σ are coordinate axes, up to sign
        assert!((w1[(0, 0)].abs() - 1.0).abs() < 1e-15 && w1[(0, 1)] == 0.0);
        assert!((w2[(0, 0)].abs() - 1.0).abs() < 1e-15 && w2[(1, 0)] == 0.0);
        let w = w2.matmul(w1);
        assert!(w.sub(&Matrix::diag(&[1.0, 0.0])).max_abs() < 1e-15);
        assert!((loss(&rep, &data).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn infeasible_subset() {
        let arch = Architecture::new(vec![3, 1, 3]).unwrap();
        let data = generate_dataset(3, 4, &SpectrumRule::Linear, 0).unwrap();
        assert!(matches!(
            build_representative(&arch, &data, &[1, 2]),
            Err(Error::InfeasibleSubset(_))
        ));
        assert!(build_representative(&arch, &data, &[4]).is_err());
    }

    #[test]
    fn seeded_representative_is_critical() {
        let arch = Architecture::new(vec![4, 2, 4]).unwrap();
        let data = generate_dataset(4, 10, &SpectrumRule::PowersOfTwo, 3).unwrap();
        let rep = build_representative(&arch, &data, &[1, 3]).unwrap();
        assert!(sq_grad_norm(&rep, &data).unwrap() <= 1e-20);
        let want = 0.5 * (data.spectrum[1] + data.spectrum[3]);
        assert!((loss(&rep, &data).unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn zero_point_index() {
        let arch = Architecture::new(vec![2, 1, 2]).unwrap();
        let rep = build_representative(&arch, &diag_data(), &[]).unwrap();
        let c = classify_point(&rep, &diag_data(), DEFAULT_TAU_REL).unwrap();
        // eigenvalues ±λ_i: -2, -1, 1, 2
        assert_eq!((c.index, c.nullity), (2, 0));
    }

    #[test]
    fn small_catalog() {
        let arch = Architecture::new(vec![2, 1, 2]).unwrap();
        let cat = build_catalog(&arch, &diag_data(), DEFAULT_TAU_REL).unwrap();
        let losses: Vec<f64> = cat.entries.iter().map(|e| e.analytic_loss).collect();
        assert_eq!(losses.len(), 3);
        for (got, want) in losses.iter().zip([1.5, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        // the minimum {1} and the saddle {2}
        assert_eq!(cat.entry(&[1]).unwrap().index, 0);
        assert!(cat.entry(&[2]).unwrap().index >= 1);
        assert_eq!(cat.pairs.len(), 3);
        for e in &cat.entries {
            assert!(!e.index_unstable);
            let p = e.representative.arch().param_count();
            assert!(e.index + e.nullity <= p);
        }
    }

    #[test]
    fn tau_floor_when_all_eigenvalues_tiny() {
        let c = Classification {
            index: 0,
            nullity: 0,
            tau: 0.0,
            eigenvalues: vec![-1e-9, 0.0, 1e-9],
        };
        assert_eq!(c.recount(1e-6), (0, 3));
    }
}
