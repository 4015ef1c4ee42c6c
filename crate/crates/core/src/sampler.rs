//! Gradient-descent trajectories and the finder start points drawn from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SeededRng;
use crate::model::{gradient, loss, Architecture, Dataset, NetworkParams};

/// Loss growth over the initial value that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub params: NetworkParams,
    pub loss: f64,
    pub sq_grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub trajectory_id: usize,
    pub init_seed: u64,
    pub snapshots: Vec<Snapshot>,
    pub status: TrainStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub init_scale: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub snapshot_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            init_scale: 1.0,
            learning_rate: 1e-3,
            epochs: 1000,
            snapshot_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init_scale must be non-negative"));
        }
        if self.epochs == 0 || self.snapshot_every == 0 {
            return Err(Error::invalid("epochs and snapshot_every must be positive"));
        }
        Ok(())
    }
}

fn snapshot(epoch: usize, params: &NetworkParams, data: &Dataset) -> Result<Snapshot> {
    let g = gradient(params, data)?;
    Ok(Snapshot {
        epoch,
        params: params.clone(),
        loss: loss(params, data)?,
        sq_grad_norm: 0.5 * g.dot(&g),
    })
}

/// Full-batch gradient descent from `N(0, init_scale²/fan_in)` weights.
pub fn train_gd(
    arch: &Architecture,
    data: &Dataset,
    config: &TrainConfig,
    seed: u64,
    trajectory_id: usize,
) -> Result<Trajectory> {
    config.validate()?;
    let mut rng = SeededRng::with_stream(seed, 1);
    let init = NetworkParams::random(arch, config.init_scale, &mut rng);
    train_gd_from(init, data, config, seed, trajectory_id)
}

/// Gradient descent from explicit initial parameters.
pub fn train_gd_from(
    init: NetworkParams,
    data: &Dataset,
    config: &TrainConfig,
    seed: u64,
    trajectory_id: usize,
) -> Result<Trajectory> {
    config.validate()?;
    let mut params = init;
    let first = snapshot(0, &params, data)?;
    let limit = DIVERGENCE_FACTOR * first.loss.max(f64::MIN_POSITIVE);
    let mut snapshots = vec![first];
    let mut status = TrainStatus::Completed;
    for epoch in 1..=config.epochs {
        let g = gradient(&params, data)?;
        let next = params.axpy(-config.learning_rate, &g);
        let next_loss = loss(&next, data)?;
        if !next_loss.is_finite() || next_loss > limit {
            log::warn!("trajectory {trajectory_id} diverged at epoch {epoch} (loss {next_loss:e})");
            status = TrainStatus::Diverged;
            break;
        }
        params = next;
        if epoch % config.snapshot_every == 0 || epoch == config.epochs {
            snapshots.push(snapshot(epoch, &params, data)?);
        }
    }
    Ok(Trajectory {
        trajectory_id,
        init_seed: seed,
        snapshots,
        status,
    })
}

/// A finder start point and where it came from.
#[derive(Debug, Clone)]
pub struct SeedPoint {
    pub trajectory_id: usize,
    pub seed_id: usize,
    pub epoch: usize,
    pub params: NetworkParams,
}

/// `k` snapshots drawn uniformly with replacement.
pub fn sample_seeds(traj: &Trajectory, k: usize, rng: &mut SeededRng) -> Result<Vec<SeedPoint>> {
    if k == 0 {
        return Err(Error::invalid("need at least one seed per trajectory"));
    }
    if traj.snapshots.is_empty() {
        return Err(Error::invalid(format!(
            "trajectory {} has no snapshots",
            traj.trajectory_id
        )));
    }
    Ok((0..k)
        .map(|seed_id| {
            let snap = &traj.snapshots[rng.index(traj.snapshots.len())];
            SeedPoint {
                trajectory_id: traj.trajectory_id,
                seed_id,
                epoch: snap.epoch,
                params: snap.params.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_representative;
    use crate::linalg::Matrix;
    use crate::model::{generate_dataset, SpectrumRule};

    #[test]
    fn critical_start_never_moves() {
        let arch = Architecture::new(vec![4, 2, 4]).unwrap();
        let data = generate_dataset(4, 8, &SpectrumRule::PowersOfTwo, 1).unwrap();
        let rep = build_representative(&arch, &data, &[1, 2]).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            snapshot_every: 10,
            ..TrainConfig::default()
        };
        let traj = train_gd_from(rep.clone(), &data, &cfg, 0, 0).unwrap();
        assert_eq!(traj.snapshots.len(), 6);
        // the gradient is ~1e-15 rather than exactly zero; updates stay at roundoff
        for s in &traj.snapshots {
            assert!(s.params.axpy(-1.0, &rep).max_abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_descent_decreases() {
        let data = Dataset::from_samples(Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let arch = Architecture::new(vec![1, 1, 1]).unwrap();
        let init = NetworkParams::from_flat(&arch, &[0.5, 0.3]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            snapshot_every: 1,
            ..TrainConfig::default()
        };
        let traj = train_gd_from(init, &data, &cfg, 0, 0).unwrap();
        let losses: Vec<f64> = traj.snapshots.iter().map(|s| s.loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]));
        assert!(*losses.last().unwrap() < 1e-3);
    }

    #[test]
    fn snapshots_strictly_increasing_and_replayable() {
        let arch = Architecture::new(vec![4, 2, 4]).unwrap();
        let data = generate_dataset(4, 8, &SpectrumRule::Linear, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 95,
            snapshot_every: 10,
            ..TrainConfig::default()
        };
        let a = train_gd(&arch, &data, &cfg, 3, 0).unwrap();
        let b = train_gd(&arch, &data, &cfg, 3, 0).unwrap();
        let epochs: Vec<usize> = a.snapshots.iter().map(|s| s.epoch).collect();
        assert_eq!(epochs, vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]);
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(x.params, y.params);
        }
    }

    #[test]
    fn divergence_is_detected() {
        let arch = Architecture::new(vec![4, 2, 4]).unwrap();
        let data = generate_dataset(4, 8, &SpectrumRule::PowersOfTwo, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 5.0,
            epochs: 100,
            ..TrainConfig::default()
        };
        let t = train_gd(&arch, &data, &cfg, 0, 0).unwrap();
        assert_eq!(t.status, TrainStatus::Diverged);
        assert!(train_gd(&arch, &data, &TrainConfig { learning_rate: 0.0, ..cfg }, 0, 0).is_err());
    }

    #[test]
    fn seed_sampling() {
        let arch = Architecture::new(vec![3, 2, 3]).unwrap();
        let data = generate_dataset(3, 5, &SpectrumRule::Linear, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            snapshot_every: 5,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut t = train_gd(&arch, &data, &cfg, 0, 4).unwrap();
        t.snapshots.truncate(1);
        let seeds = sample_seeds(&t, 3, &mut SeededRng::new(0)).unwrap();
        assert_eq!(seeds.len(), 3);
        for s in &seeds {
            assert_eq!(s.params, t.snapshots[0].params);
            assert_eq!(s.trajectory_id, 4);
        }
        let full = train_gd(&arch, &data, &TrainConfig { epochs: 50, ..cfg.clone() }, 0, 0).unwrap();
        let a = sample_seeds(&full, 15, &mut SeededRng::new(8)).unwrap();
        let b = sample_seeds(&full, 15, &mut SeededRng::new(8)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.epoch, y.epoch);
            assert_eq!(x.params, y.params);
            let src = full.snapshots.iter().find(|s| s.epoch == x.epoch).unwrap();
            assert_eq!(src.params, x.params);
        }
        assert!(sample_seeds(&full, 0, &mut SeededRng::new(0)).is_err());
        t.snapshots.clear();
        assert!(sample_seeds(&t, 1, &mut SeededRng::new(0)).is_err());
    }
}
