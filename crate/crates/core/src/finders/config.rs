use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gnm,
    NewtonMr,
    NewtonTr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gnm, Method::NewtonMr, Method::NewtonTr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gnm => "gnm",
            Method::NewtonMr => "newton-mr",
            Method::NewtonTr => "newton-tr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?} (gnm, newton-mr, newton-tr)")))
    }
}

/// Backtracking (Armijo) line search on `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchConfig {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub min_step: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            min_step: 1e-20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinresConfig {
    pub rel_tol: f64,
    /// `None` means one iteration per parameter.
    pub max_iters: Option<usize>,
}

impl Default for MinresConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_iters: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionConfig {
    pub initial_radius: f64,
    pub max_radius: f64,
    pub min_radius: f64,
    /// Radius multiplier when `ρ < shrink_below`.
    pub shrink_factor: f64,
    pub shrink_below: f64,
    /// Radius multiplier when `ρ > grow_above` and the step hit the boundary.
    pub grow_factor: f64,
    pub grow_above: f64,
    /// Steps are accepted when `ρ > accept_above`.
    pub accept_above: f64,
    pub cg_rel_tol: f64,
    pub cg_max_iters: Option<usize>,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            initial_radius: 1.0,
            max_radius: 1e3,
            min_radius: 1e-14,
            shrink_factor: 0.25,
            shrink_below: 0.25,
            grow_factor: 2.0,
            grow_above: 0.75,
            accept_above: 0.1,
            cg_rel_tol: 1e-6,
            cg_max_iters: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinderConfig {
    /// A run is converged iff its terminal `g` is at or below this value.
    pub epsilon_crit: f64,
    /// Iteration stops once `g` falls to this value; defaults to
    /// `epsilon_crit`. Lower it to keep iterating past the criterion.
    pub epsilon_stop: Option<f64>,
    pub max_epochs: usize,
    pub line_search: LineSearchConfig,
    pub minres: MinresConfig,
    pub trust_region: TrustRegionConfig,
}

impl Default for FinderConfig {
    fn default() -> Self {
        Self {
            epsilon_crit: 1e-10,
            epsilon_stop: None,
            max_epochs: 500,
            line_search: LineSearchConfig::default(),
            minres: MinresConfig::default(),
            trust_region: TrustRegionConfig::default(),
        }
    }
}

impl FinderConfig {
    pub fn stop_threshold(&self) -> f64 {
        self.epsilon_stop.unwrap_or(self.epsilon_crit)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        let fraction = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        positive("epsilon_crit", self.epsilon_crit)?;
        if let Some(stop) = self.epsilon_stop {
            if !(stop >= 0.0 && stop <= self.epsilon_crit) {
                return Err(Error::invalid(format!(
                    "epsilon_stop must lie in [0, epsilon_crit], got {stop}"
                )));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be positive"));
        }
        let ls = &self.line_search;
        positive("line_search.initial_step", ls.initial_step)?;
        fraction("line_search.shrink", ls.shrink)?;
        fraction("line_search.sufficient_decrease", ls.sufficient_decrease)?;
        positive("line_search.min_step", ls.min_step)?;
        fraction("minres.rel_tol", self.minres.rel_tol)?;
        if self.minres.max_iters == Some(0) {
            return Err(Error::invalid("minres.max_iters must be positive"));
        }
        let tr = &self.trust_region;
        positive("trust_region.initial_radius", tr.initial_radius)?;
        positive("trust_region.max_radius", tr.max_radius)?;
        positive("trust_region.min_radius", tr.min_radius)?;
        fraction("trust_region.shrink_factor", tr.shrink_factor)?;
        fraction("trust_region.shrink_below", tr.shrink_below)?;
        fraction("trust_region.grow_above", tr.grow_above)?;
        fraction("trust_region.accept_above", tr.accept_above)?;
        fraction("trust_region.cg_rel_tol", tr.cg_rel_tol)?;
        if !(tr.grow_factor > 1.0) {
            return Err(Error::invalid("trust_region.grow_factor must exceed 1"));
        }
        if tr.initial_radius > tr.max_radius || tr.min_radius > tr.initial_radius {
            return Err(Error::invalid(
                "trust-region radii must satisfy min <= initial <= max",
            ));
        }
        if tr.cg_max_iters == Some(0) {
            return Err(Error::invalid("trust_region.cg_max_iters must be positive"));
        }
        Ok(())
    }
}
