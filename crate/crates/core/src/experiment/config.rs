use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finders::{FinderConfig, Method};
use crate::model::{Architecture, SpectrumRule};
use crate::sampler::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_samples: usize,
    pub spectrum: SpectrumRule,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_samples: 256,
            spectrum: SpectrumRule::PowersOfTwo,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub snapshot_every: usize,
    /// One initialisation seed per trajectory; defaults to `seed + t`.
    pub init_seeds: Option<Vec<u64>>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            count: 10,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            init_scale: train.init_scale,
            snapshot_every: train.snapshot_every,
            init_seeds: None,
        }
    }
}

impl TrajectoryConfig {
    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            init_scale: self.init_scale,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            snapshot_every: self.snapshot_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinderConfigs {
    pub gnm: FinderConfig,
    #[serde(rename = "newton-mr")]
    pub newton_mr: FinderConfig,
    #[serde(rename = "newton-tr")]
    pub newton_tr: FinderConfig,
}

impl FinderConfigs {
    pub fn get(&self, method: Method) -> &FinderConfig {
        match method {
            Method::Gnm => &self.gnm,
            Method::NewtonMr => &self.newton_mr,
            Method::NewtonTr => &self.newton_tr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchTolerances {
    /// `|loss − e.loss| ≤ loss_rel_tol · max(1, e.loss)`; indices must agree
    /// exactly.
    pub loss_rel_tol: f64,
}

impl Default for MatchTolerances {
    fn default() -> Self {
        Self { loss_rel_tol: 1e-5 }
    }
}

/// Everything needed to reproduce one experiment. Every field has a default,
/// so `{}` is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Data dimension; defaults to the first width.
    pub d: Option<usize>,
    /// Layer widths `(d, n_1, …, d)`.
    pub widths: Vec<usize>,
    pub data: DataConfig,
    pub trajectories: TrajectoryConfig,
    pub seeds_per_trajectory: usize,
    pub methods: Vec<Method>,
    pub finders: FinderConfigs,
    pub matching: MatchTolerances,
    /// Relative zero threshold for Hessian eigenvalues.
    pub tau_rel: f64,
    /// Also write each catalog representative as a parameter JSON file.
    pub dump_representatives: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d: None,
            widths: vec![8, 4, 8],
            data: DataConfig::default(),
            trajectories: TrajectoryConfig::default(),
            seeds_per_trajectory: 15,
            methods: Method::ALL.to_vec(),
            finders: FinderConfigs::default(),
            matching: MatchTolerances::default(),
            tau_rel: crate::catalog::DEFAULT_TAU_REL,
            dump_representatives: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn architecture(&self) -> Result<Architecture> {
        let arch = Architecture::new(self.widths.clone())?;
        if let Some(d) = self.d {
            if d != arch.dim() {
                return Err(Error::invalid(format!(
                    "d = {d} disagrees with widths {:?}",
                    self.widths
                )));
            }
        }
        Ok(arch)
    }

    /// Copy with every optional field filled in, as echoed in the manifest.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.d = Some(self.widths.first().copied().unwrap_or(0));
        c.data.seed = Some(self.data_seed());
        c.trajectories.init_seeds =
            Some((0..self.trajectories.count).map(|t| self.init_seed(t)).collect());
        c.methods = self.method_list();
        c
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.seed)
    }

    pub fn init_seed(&self, trajectory: usize) -> u64 {
        match &self.trajectories.init_seeds {
            Some(seeds) => seeds[trajectory],
            None => self.seed.wrapping_add(trajectory as u64),
        }
    }

    /// Stream for drawing finder seeds from trajectory `t`.
    pub fn sampling_seed(&self, trajectory: usize) -> u64 {
        self.init_seed(trajectory)
    }

    pub fn validate(&self) -> Result<()> {
        let arch = self.architecture()?;
        self.data.spectrum.eigenvalues(arch.dim())?;
        if self.data.n_samples < arch.dim() {
            return Err(Error::invalid("data.n_samples must be at least the data dimension"));
        }
        if self.trajectories.count == 0 || self.seeds_per_trajectory == 0 {
            return Err(Error::invalid("trajectory and seed counts must be positive"));
        }
        if let Some(seeds) = &self.trajectories.init_seeds {
            if seeds.len() != self.trajectories.count {
                return Err(Error::invalid(format!(
                    "{} init seeds for {} trajectories",
                    seeds.len(),
                    self.trajectories.count
                )));
            }
        }
        self.trajectories.train().validate()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        for m in &self.methods {
            self.finders.get(*m).validate()?;
        }
        if !(self.matching.loss_rel_tol > 0.0) || !(self.tau_rel > 0.0) {
            return Err(Error::invalid("matching and classification tolerances must be positive"));
        }
        Ok(())
    }

    /// Methods in canonical order without duplicates.
    pub fn method_list(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
        assert_eq!(c.trajectories.count * c.seeds_per_trajectory, 150);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_and_validation() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"methods": ["gnm"], "trajectories": {"count": 1, "epochs": 20},
                "data": {"spectrum": {"rule": "explicit", "values": [4, 3, 2, 1]}},
                "widths": [4, 2, 4], "finders": {"newton-tr": {"max_epochs": 3}}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.trajectories.epochs, 20);
        assert_eq!(c.finders.newton_tr.max_epochs, 3);
        assert_eq!(c.methods, vec![Method::Gnm]);

        let bad: ExperimentConfig = serde_json::from_str(r#"{"methods": []}"#).unwrap();
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        let bad: ExperimentConfig =
            serde_json::from_str(r#"{"trajectories": {"count": 2, "init_seeds": [1]}}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
