//! On-disk layout of an experiment directory and the CSV row schemas.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{parse_subset_label, subset_label, Catalog};
use crate::error::{Error, Result};
use crate::finders::{Method, RunStatus};
use crate::model::NetworkParams;

pub const DATASET: &str = "dataset.json";
pub const CATALOG: &str = "catalog.csv";
pub const REPRESENTATIVES_DIR: &str = "representatives";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const SNAPSHOTS_DIR: &str = "snapshots";
pub const SEEDS: &str = "seeds.csv";
pub const TRACES: &str = "traces.csv";
pub const CRITICAL_POINTS: &str = "critical_points.csv";
pub const MATCH_REPORT: &str = "match_report.json";
pub const FIG1_TRACES: &str = "fig1_traces.csv";
pub const FIG1_SCATTER: &str = "fig1_scatter.csv";
pub const MANIFEST: &str = "manifest.json";

/// `matched_subset` value for a run matched to the empty subset, kept
/// distinct from the empty string that means "unmatched".
pub const EMPTY_SUBSET_MATCH: &str = "{}";

pub fn snapshot_path(trajectory_id: usize, epoch: usize) -> PathBuf {
    Path::new(SNAPSHOTS_DIR).join(format!("traj{trajectory_id:03}_epoch{epoch:06}.json"))
}

pub fn representative_path(subset: &[usize]) -> PathBuf {
    let label = if subset.is_empty() {
        "empty".to_string()
    } else {
        subset_label(subset).replace(';', "_")
    };
    Path::new(REPRESENTATIVES_DIR).join(format!("subset_{label}.json"))
}

pub fn write_params(path: &Path, params: &NetworkParams) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, params.to_json())?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<NetworkParams> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::invalid(format!("cannot read {}: {e}", path.display()))
    })?;
    NetworkParams::from_json(&text)
}

/// Floats are written with 17 significant digits so that reading a file
/// back reproduces the values exactly.
mod float17 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::linalg::fmt_f64(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.trim().parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub trajectory_id: usize,
    pub epoch: usize,
    #[serde(with = "float17")]
    pub loss: f64,
    #[serde(with = "float17")]
    pub sq_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub trajectory_id: usize,
    pub seed_id: usize,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub method: Method,
    pub trajectory_id: usize,
    pub seed_id: usize,
    pub epoch: usize,
    #[serde(with = "float17")]
    pub sq_grad_norm: f64,
    #[serde(with = "float17")]
    pub loss: f64,
    #[serde(with = "float17")]
    pub step_or_radius: f64,
    pub inner_iters: usize,
    pub accepted: bool,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointRow {
    pub method: Method,
    pub trajectory_id: usize,
    pub seed_id: usize,
    #[serde(with = "float17")]
    pub terminal_sq_grad_norm: f64,
    #[serde(with = "float17")]
    pub loss: f64,
    pub index: usize,
    pub nullity: usize,
    pub converged: bool,
    pub matched_subset: String,
}

impl CriticalPointRow {
    pub fn matched(&self) -> Option<Vec<usize>> {
        match self.matched_subset.as_str() {
            "" => None,
            EMPTY_SUBSET_MATCH => Some(Vec::new()),
            label => parse_subset_label(label).ok(),
        }
    }

    pub fn set_matched(&mut self, subset: Option<&[usize]>) {
        self.matched_subset = match subset {
            None => String::new(),
            Some([]) => EMPTY_SUBSET_MATCH.to_string(),
            Some(s) => subset_label(s),
        };
    }
}

/// One catalog row as read back from `catalog.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRow {
    pub subset: String,
    pub r: usize,
    #[serde(with = "float17")]
    pub analytic_loss: f64,
    pub index: usize,
    pub nullity: usize,
    #[serde(with = "float17")]
    pub tau: f64,
}

impl CatalogRow {
    pub fn subset(&self) -> Result<Vec<usize>> {
        parse_subset_label(&self.subset)
    }
}

pub fn catalog_rows(catalog: &Catalog) -> Vec<CatalogRow> {
    catalog
        .entries
        .iter()
        .map(|e| CatalogRow {
            subset: e.subset_label(),
            r: e.rank(),
            analytic_loss: e.analytic_loss,
            index: e.index,
            nullity: e.nullity,
            tau: e.tau,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1TraceRow {
    pub method: Method,
    pub trajectory_id: usize,
    pub seed_id: usize,
    pub epoch: usize,
    #[serde(with = "float17")]
    pub sq_grad_norm: f64,
    /// `max(sq_grad_norm, floor)` for log-scale display.
    #[serde(with = "float17")]
    pub display_sq_grad_norm: f64,
    pub clipped: bool,
    pub label: RunLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunLabel {
    Converged,
    Unconverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Catalog,
    Recovered,
}

/// Catalog rows leave the run columns empty; recovered rows carry the run
/// key and the catalog subset they matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1ScatterRow {
    pub layer: Layer,
    pub method: Option<Method>,
    pub trajectory_id: Option<usize>,
    pub seed_id: Option<usize>,
    pub subset: String,
    #[serde(with = "float17")]
    pub loss: f64,
    pub index: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub const TRAJECTORY_HEADER: &[&str] = &["trajectory_id", "epoch", "loss", "sq_grad_norm"];
pub const SEED_HEADER: &[&str] = &["trajectory_id", "seed_id", "epoch"];
pub const TRACE_HEADER: &[&str] = &[
    "method", "trajectory_id", "seed_id", "epoch", "sq_grad_norm", "loss", "step_or_radius",
    "inner_iters", "accepted", "status",
];
pub const CRITICAL_POINT_HEADER: &[&str] = &[
    "method", "trajectory_id", "seed_id", "terminal_sq_grad_norm", "loss", "index", "nullity",
    "converged", "matched_subset",
];
pub const FIG1_TRACE_HEADER: &[&str] = &[
    "method", "trajectory_id", "seed_id", "epoch", "sq_grad_norm", "display_sq_grad_norm",
    "clipped", "label",
];
pub const FIG1_SCATTER_HEADER: &[&str] =
    &["layer", "method", "trajectory_id", "seed_id", "subset", "loss", "index"];
