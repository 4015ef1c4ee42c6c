use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SeededRng};

/// Layer widths `(n_0, n_1, …, n_L)` with `n_0 = n_L = d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::invalid(format!(
                "need at least two weight matrices, got widths {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid(format!("zero width in {widths:?}")));
        }
        if widths.first() != widths.last() {
            return Err(Error::invalid(format!(
                "input and output widths differ in {widths:?}"
            )));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Data dimension `d`.
    pub fn dim(&self) -> usize {
        self.widths[0]
    }

    /// Number of weight matrices `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// Bottleneck `p`, the smallest width.
    pub fn bottleneck(&self) -> usize {
        *self.widths.iter().min().unwrap()
    }

    /// Shape `(n_i, n_{i-1})` of layer `i` (0-based).
    pub fn layer_shape(&self, i: usize) -> (usize, usize) {
        (self.widths[i + 1], self.widths[i])
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

impl TryFrom<Vec<usize>> for Architecture {
    type Error = Error;

    fn try_from(widths: Vec<usize>) -> Result<Self> {
        Self::new(widths)
    }
}

impl From<Architecture> for Vec<usize> {
    fn from(arch: Architecture) -> Self {
        arch.widths
    }
}

/// A point in parameter space: the ordered weight matrices `W_1, …, W_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    layers: Vec<Matrix>,
}

impl NetworkParams {
    pub fn new(arch: Architecture, layers: Vec<Matrix>) -> Result<Self> {
        if layers.len() != arch.depth() {
            return Err(Error::dim(format!(
                "{} layers for depth {}",
                layers.len(),
                arch.depth()
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.shape() != arch.layer_shape(i) {
                return Err(Error::dim(format!(
                    "layer {} has shape {:?}, expected {:?}",
                    i + 1,
                    layer.shape(),
                    arch.layer_shape(i)
                )));
            }
        }
        Ok(Self { arch, layers })
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let layers = (0..arch.depth())
            .map(|i| {
                let (r, c) = arch.layer_shape(i);
                Matrix::zeros(r, c)
            })
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    /// Every layer an identity; only defined when all widths are equal.
    pub fn identity(arch: &Architecture) -> Result<Self> {
        let d = arch.dim();
        if arch.widths().iter().any(|&w| w != d) {
            return Err(Error::invalid("identity network needs equal widths"));
        }
        Ok(Self {
            arch: arch.clone(),
            layers: vec![Matrix::identity(d); arch.depth()],
        })
    }

    /// Entries drawn i.i.d. from `N(0, scale²/fan_in)`.
    pub fn random(arch: &Architecture, scale: f64, rng: &mut SeededRng) -> Self {
        let layers = (0..arch.depth())
            .map(|i| {
                let (r, c) = arch.layer_shape(i);
                let std = scale / (c as f64).sqrt();
                Matrix::from_fn(r, c, |_, _| std * rng.normal())
            })
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    pub fn from_flat(arch: &Architecture, flat: &[f64]) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(Error::dim(format!(
                "{} coordinates for {} parameters",
                flat.len(),
                arch.param_count()
            )));
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(arch.depth());
        for i in 0..arch.depth() {
            let (r, c) = arch.layer_shape(i);
            layers.push(Matrix::from_vec(r, c, flat[offset..offset + r * c].to_vec())?);
            offset += r * c;
        }
        Ok(Self {
            arch: arch.clone(),
            layers,
        })
    }

    /// Layer-major, row-major within each layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.as_slice());
        }
        out
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Matrix {
        &self.layers[i]
    }

    pub fn dot(&self, other: &NetworkParams) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.frobenius_dot(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| m.max(l.max_abs()))
    }

    /// `self + alpha·other`
    pub fn axpy(&self, alpha: f64, other: &NetworkParams) -> NetworkParams {
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.add(&b.scale(alpha)))
            .collect();
        NetworkParams {
            arch: self.arch.clone(),
            layers,
        }
    }

    pub fn scale(&self, alpha: f64) -> NetworkParams {
        NetworkParams {
            arch: self.arch.clone(),
            layers: self.layers.iter().map(|l| l.scale(alpha)).collect(),
        }
    }

    pub(crate) fn check_arch(&self, other: &Architecture) -> Result<()> {
        if &self.arch != other {
            return Err(Error::dim(format!(
                "parameters for widths {:?}, expected {:?}",
                self.arch.widths(),
                other.widths()
            )));
        }
        Ok(())
    }

    /// JSON document with `widths` and one matrix object per layer.
    pub fn to_json(&self) -> String {
        let widths: Vec<String> = self.arch.widths().iter().map(|w| w.to_string()).collect();
        let layers: Vec<String> = self.layers.iter().map(Matrix::to_json).collect();
        format!(
            "{{\"widths\":[{}],\"layers\":[{}]}}",
            widths.join(","),
            layers.join(",")
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            widths: Vec<usize>,
            layers: Vec<serde_json::Value>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let arch = Architecture::new(doc.widths)?;
        let layers = doc
            .layers
            .into_iter()
            .map(Matrix::from_json_value)
            .collect::<Result<Vec<_>>>()?;
        Self::new(arch, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_validation() {
        assert!(Architecture::new(vec![4, 4]).is_err());
        assert!(Architecture::new(vec![4, 0, 4]).is_err());
        assert!(Architecture::new(vec![4, 2, 3]).is_err());
        let a = Architecture::new(vec![8, 4, 6, 8]).unwrap();
        assert_eq!(a.depth(), 3);
        assert_eq!(a.bottleneck(), 4);
        assert_eq!(a.param_count(), 32 + 24 + 48);
    }

    #[test]
    fn flat_round_trip_and_json() {
        let arch = Architecture::new(vec![3, 2, 5, 3]).unwrap();
        let mut rng = SeededRng::new(1);
        let p = NetworkParams::random(&arch, 1.0, &mut rng);
        let flat = p.flatten();
        assert_eq!(flat.len(), arch.param_count());
        assert_eq!(NetworkParams::from_flat(&arch, &flat).unwrap(), p);
        assert_eq!(NetworkParams::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn shape_errors() {
        let arch = Architecture::new(vec![3, 2, 3]).unwrap();
        assert!(NetworkParams::new(arch.clone(), vec![Matrix::zeros(2, 3)]).is_err());
        assert!(
            NetworkParams::new(arch.clone(), vec![Matrix::zeros(3, 2), Matrix::zeros(3, 2)])
                .is_err()
        );
        assert!(NetworkParams::from_flat(&arch, &[0.0; 5]).is_err());
        assert!(NetworkParams::identity(&arch).is_err());
    }
}
