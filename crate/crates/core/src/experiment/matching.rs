//! Matching classified run end points against the catalog in the
//! (loss, index) plane.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::config::MatchTolerances;
use super::files::{CatalogRow, CriticalPointRow};
use crate::catalog::{subset_label, Catalog};
use crate::error::Result;
use crate::finders::Method;

/// The part of a catalog entry matching looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogPoint {
    pub subset: Vec<usize>,
    pub loss: f64,
    pub index: usize,
}

impl CatalogPoint {
    pub fn from_catalog(catalog: &Catalog) -> Vec<CatalogPoint> {
        catalog
            .entries
            .iter()
            .map(|e| CatalogPoint {
                subset: e.subset.clone(),
                loss: e.analytic_loss,
                index: e.index,
            })
            .collect()
    }

    pub fn from_rows(rows: &[CatalogRow]) -> Result<Vec<CatalogPoint>> {
        rows.iter()
            .map(|r| {
                Ok(CatalogPoint {
                    subset: r.subset()?,
                    loss: r.analytic_loss,
                    index: r.index,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum MatchOutcome {
    Matched {
        subset: String,
        /// More than one entry was within tolerance.
        ambiguous: bool,
    },
    Unmatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMatch {
    pub method: Method,
    pub trajectory_id: usize,
    pub seed_id: usize,
    pub converged: bool,
    pub loss: f64,
    pub index: usize,
    #[serde(flatten)]
    pub outcome: MatchOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub converged: usize,
    pub matched: usize,
    pub ambiguous: usize,
    /// `matched / converged`; absent when nothing converged.
    pub match_rate: Option<f64>,
    /// Catalog subsets hit at least once, in catalog label form.
    pub entries_hit: Vec<String>,
    pub distinct_entries: usize,
    /// Distinct entries hit with index > 0.
    pub distinct_saddles: usize,
    pub max_terminal_sq_grad_norm: Option<f64>,
    pub min_terminal_sq_grad_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub loss_rel_tol: f64,
    pub summaries: Vec<MethodSummary>,
    pub runs: Vec<RunMatch>,
}

impl MatchReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Position of the catalog entry a classified point matches, and whether the
/// choice was ambiguous.
pub fn match_point(loss: f64, index: usize, catalog: &[CatalogPoint], tol: &MatchTolerances) -> Option<(usize, bool)> {
    let mut best: Option<(usize, f64)> = None;
    let mut hits = 0;
    for (i, e) in catalog.iter().enumerate() {
        let dist = (loss - e.loss).abs();
        if e.index != index || !(dist <= tol.loss_rel_tol * e.loss.abs().max(1.0)) {
            continue;
        }
        hits += 1;
        if best.map_or(true, |(_, d)| dist < d) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| (i, hits > 1))
}

/// Matches every converged record; unconverged records stay unmatched.
pub fn match_runs(records: &[CriticalPointRow], catalog: &[CatalogPoint], tol: &MatchTolerances) -> MatchReport {
    let runs: Vec<RunMatch> = records
        .iter()
        .map(|r| {
            let hit = if r.converged {
                match_point(r.loss, r.index, catalog, tol)
            } else {
                None
            };
            let outcome = match hit {
                Some((i, ambiguous)) => MatchOutcome::Matched {
                    subset: subset_label(&catalog[i].subset),
                    ambiguous,
                },
                None => MatchOutcome::Unmatched,
            };
            RunMatch {
                method: r.method,
                trajectory_id: r.trajectory_id,
                seed_id: r.seed_id,
                converged: r.converged,
                loss: r.loss,
                index: r.index,
                outcome,
            }
        })
        .collect();

    let methods: BTreeSet<Method> = records.iter().map(|r| r.method).collect();
    let summaries = methods
        .into_iter()
        .map(|m| summarize(m, records, &runs, catalog))
        .collect();
    MatchReport {
        loss_rel_tol: tol.loss_rel_tol,
        summaries,
        runs,
    }
}

fn summarize(method: Method, records: &[CriticalPointRow], runs: &[RunMatch], catalog: &[CatalogPoint]) -> MethodSummary {
    let mut summary = MethodSummary {
        method,
        runs: 0,
        converged: 0,
        matched: 0,
        ambiguous: 0,
        match_rate: None,
        entries_hit: Vec::new(),
        distinct_entries: 0,
        distinct_saddles: 0,
        max_terminal_sq_grad_norm: None,
        min_terminal_sq_grad_norm: None,
    };
    let mut hit = BTreeSet::new();
    for (rec, run) in records.iter().zip(runs).filter(|(r, _)| r.method == method) {
        summary.runs += 1;
        summary.converged += rec.converged as usize;
        let g = rec.terminal_sq_grad_norm;
        if g.is_finite() {
            summary.max_terminal_sq_grad_norm = Some(summary.max_terminal_sq_grad_norm.map_or(g, |m| m.max(g)));
            summary.min_terminal_sq_grad_norm = Some(summary.min_terminal_sq_grad_norm.map_or(g, |m| m.min(g)));
        }
        if let MatchOutcome::Matched { subset, ambiguous } = &run.outcome {
            summary.matched += 1;
            summary.ambiguous += *ambiguous as usize;
            hit.insert(subset.clone());
        }
    }
    if summary.converged > 0 {
        summary.match_rate = Some(summary.matched as f64 / summary.converged as f64);
    }
    // Catalog order rather than string order.
    summary.entries_hit = catalog
        .iter()
        .map(|e| subset_label(&e.subset))
        .filter(|l| hit.contains(l))
        .collect();
    summary.distinct_entries = summary.entries_hit.len();
    summary.distinct_saddles = catalog
        .iter()
        .filter(|e| e.index > 0 && hit.contains(&subset_label(&e.subset)))
        .count();
    summary
}
