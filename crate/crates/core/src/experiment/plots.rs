//! Plot-ready tables: g-versus-epoch traces and the (loss, index) scatter.

use std::collections::BTreeMap;
use std::path::Path;

use super::files::{
    self, CatalogRow, CriticalPointRow, Fig1ScatterRow, Fig1TraceRow, Layer, RunLabel, TraceRow,
};
use crate::error::Result;
use crate::finders::Method;

/// Smallest g shown on a log axis; raw values below it are kept but flagged.
pub const DISPLAY_FLOOR: f64 = 1e-40;

pub fn trace_rows(traces: &[TraceRow], records: &[CriticalPointRow]) -> Vec<Fig1TraceRow> {
    let converged: BTreeMap<(Method, usize, usize), bool> = records
        .iter()
        .map(|r| ((r.method, r.trajectory_id, r.seed_id), r.converged))
        .collect();
    traces
        .iter()
        .map(|t| {
            let key = (t.method, t.trajectory_id, t.seed_id);
            let label = match converged.get(&key) {
                Some(true) => RunLabel::Converged,
                _ => RunLabel::Unconverged,
            };
            Fig1TraceRow {
                method: t.method,
                trajectory_id: t.trajectory_id,
                seed_id: t.seed_id,
                epoch: t.epoch,
                sq_grad_norm: t.sq_grad_norm,
                display_sq_grad_norm: t.sq_grad_norm.max(DISPLAY_FLOOR),
                clipped: t.sq_grad_norm < DISPLAY_FLOOR,
                label,
            }
        })
        .collect()
}

/// Catalog layer first, then one recovered row per converged run.
pub fn scatter_rows(catalog: &[CatalogRow], records: &[CriticalPointRow]) -> Vec<Fig1ScatterRow> {
    let truth = catalog.iter().map(|c| Fig1ScatterRow {
        layer: Layer::Catalog,
        method: None,
        trajectory_id: None,
        seed_id: None,
        subset: c.subset.clone(),
        loss: c.analytic_loss,
        index: c.index,
    });
    let recovered = records.iter().filter(|r| r.converged).map(|r| Fig1ScatterRow {
        layer: Layer::Recovered,
        method: Some(r.method),
        trajectory_id: Some(r.trajectory_id),
        seed_id: Some(r.seed_id),
        subset: r.matched_subset.clone(),
        loss: r.loss,
        index: r.index,
    });
    truth.chain(recovered).collect()
}

/// Reads `catalog.csv`, `traces.csv` and `critical_points.csv` from `dir` and
/// writes `fig1_traces.csv` and `fig1_scatter.csv` next to them.
pub fn emit_plot_data(dir: &Path) -> Result<()> {
    let catalog: Vec<CatalogRow> = files::read_csv(&dir.join(files::CATALOG))?;
    let traces: Vec<TraceRow> = files::read_csv(&dir.join(files::TRACES))?;
    let records: Vec<CriticalPointRow> = files::read_csv(&dir.join(files::CRITICAL_POINTS))?;
    files::write_csv(
        &dir.join(files::FIG1_TRACES),
        &trace_rows(&traces, &records),
        files::FIG1_TRACE_HEADER,
    )?;
    files::write_csv(
        &dir.join(files::FIG1_SCATTER),
        &scatter_rows(&catalog, &records),
        files::FIG1_SCATTER_HEADER,
    )
}
