//! End-to-end pipeline: data, catalog, trajectories, seeds, finder runs,
//! matching and plot tables, each stage writing into one output directory.

mod config;
pub mod files;
mod manifest;
mod matching;
mod plots;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{DataConfig, ExperimentConfig, FinderConfigs, MatchTolerances, TrajectoryConfig};
pub use files::{CatalogRow, CriticalPointRow, Fig1ScatterRow, Fig1TraceRow, Layer, RunLabel, TraceRow};
pub use manifest::{file_sha256, sha256_hex, Manifest, StageRecord, StageStatus, SOFTWARE};
pub use matching::{match_point, match_runs, CatalogPoint, MatchOutcome, MatchReport, MethodSummary, RunMatch};
pub use plots::{emit_plot_data, scatter_rows, trace_rows, DISPLAY_FLOOR};

use crate::catalog::{build_catalog, Catalog};
use crate::error::{Error, Result};
use crate::finders::{classify_terminal, find, CriticalPointRecord, Method, NetworkRun};
use crate::linalg::SeededRng;
use crate::model::{generate_dataset, Dataset};
use crate::sampler::{sample_seeds, train_gd, SeedPoint, Snapshot, TrainStatus, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    GenData,
    Catalog,
    Train,
    SampleSeeds,
    Find,
    Match,
    EmitPlots,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::GenData,
        Stage::Catalog,
        Stage::Train,
        Stage::SampleSeeds,
        Stage::Find,
        Stage::Match,
        Stage::EmitPlots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Catalog => "catalog",
            Stage::Train => "train",
            Stage::SampleSeeds => "sample-seeds",
            Stage::Find => "find",
            Stage::Match => "match",
            Stage::EmitPlots => "emit-plots",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One finder run together with its classification.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub trajectory_id: usize,
    pub seed_id: usize,
    pub result: NetworkRun,
    pub record: CriticalPointRecord,
}

/// Everything `run_experiment` produced, in memory.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub data: Dataset,
    pub catalog: Catalog,
    pub trajectories: Vec<Trajectory>,
    pub seeds: Vec<SeedPoint>,
    pub runs: Vec<RunResult>,
    pub critical_points: Vec<CriticalPointRow>,
    pub report: MatchReport,
    pub manifest: Manifest,
}

/// Generates the dataset and writes `dataset.json`.
pub fn gen_data(config: &ExperimentConfig) -> Result<Dataset> {
    let arch = config.architecture()?;
    let data = generate_dataset(
        arch.dim(),
        config.data.n_samples,
        &config.data.spectrum,
        config.data_seed(),
    )?;
    std::fs::write(config.output_dir.join(files::DATASET), data.to_json())?;
    Ok(data)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(files::DATASET);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    Dataset::from_json(&text)
}

/// Builds the catalog and writes `catalog.csv` (and representatives when
/// asked to).
pub fn catalog_stage(config: &ExperimentConfig, data: &Dataset) -> Result<Catalog> {
    let arch = config.architecture()?;
    let catalog = build_catalog(&arch, data, config.tau_rel)?;
    catalog.write_csv(&config.output_dir.join(files::CATALOG))?;
    if config.dump_representatives {
        for e in &catalog.entries {
            files::write_params(
                &config.output_dir.join(files::representative_path(&e.subset)),
                &e.representative,
            )?;
        }
    }
    Ok(catalog)
}

fn catalog_files(config: &ExperimentConfig, catalog: Option<&[CatalogRow]>) -> Result<Vec<PathBuf>> {
    let mut out = vec![PathBuf::from(files::CATALOG)];
    if config.dump_representatives {
        if let Some(rows) = catalog {
            for r in rows {
                out.push(files::representative_path(&r.subset()?));
            }
        }
    }
    Ok(out)
}

/// Smallest convergence criterion among the configured methods.
fn tightest_criterion(config: &ExperimentConfig) -> f64 {
    config
        .method_list()
        .iter()
        .map(|m| config.finders.get(*m).epsilon_crit)
        .fold(f64::INFINITY, f64::min)
}

/// Trains every trajectory and writes `trajectories.csv` plus one parameter
/// file per snapshot.
pub fn train_stage(config: &ExperimentConfig, data: &Dataset) -> Result<Vec<Trajectory>> {
    let arch = config.architecture()?;
    let train = config.trajectories.train();
    let trajectories: Vec<Trajectory> = (0..config.trajectories.count)
        .into_par_iter()
        .map(|t| train_gd(&arch, data, &train, config.init_seed(t), t))
        .collect::<Result<_>>()?;

    let criterion = tightest_criterion(config);
    let mut rows = Vec::new();
    for traj in &trajectories {
        if traj.status == TrainStatus::Diverged {
            log::warn!("trajectory {} diverged", traj.trajectory_id);
        }
        if let Some(s) = traj.snapshots.iter().find(|s| s.sq_grad_norm <= criterion) {
            log::warn!(
                "trajectory {} reached g = {:e} at epoch {} without a finder",
                traj.trajectory_id,
                s.sq_grad_norm,
                s.epoch
            );
        }
        for s in &traj.snapshots {
            rows.push(files::TrajectoryRow {
                trajectory_id: traj.trajectory_id,
                epoch: s.epoch,
                loss: s.loss,
                sq_grad_norm: s.sq_grad_norm,
            });
            files::write_params(
                &config.output_dir.join(files::snapshot_path(traj.trajectory_id, s.epoch)),
                &s.params,
            )?;
        }
    }
    files::write_csv(
        &config.output_dir.join(files::TRAJECTORIES),
        &rows,
        files::TRAJECTORY_HEADER,
    )?;
    Ok(trajectories)
}

fn trajectory_files(rows: &[files::TrajectoryRow]) -> Vec<PathBuf> {
    let mut out = vec![PathBuf::from(files::TRAJECTORIES)];
    out.extend(rows.iter().map(|r| files::snapshot_path(r.trajectory_id, r.epoch)));
    out
}

/// Rebuilds trajectories from `trajectories.csv` and the snapshot files.
pub fn load_trajectories(dir: &Path, config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    let rows: Vec<files::TrajectoryRow> = files::read_csv(&dir.join(files::TRAJECTORIES))?;
    let mut out: Vec<Trajectory> = Vec::new();
    for row in rows {
        let params = files::read_params(&dir.join(files::snapshot_path(row.trajectory_id, row.epoch)))?;
        let snap = Snapshot {
            epoch: row.epoch,
            params,
            loss: row.loss,
            sq_grad_norm: row.sq_grad_norm,
        };
        match out.last_mut() {
            Some(t) if t.trajectory_id == row.trajectory_id => t.snapshots.push(snap),
            _ => out.push(Trajectory {
                trajectory_id: row.trajectory_id,
                init_seed: config.init_seed(row.trajectory_id),
                snapshots: vec![snap],
                status: TrainStatus::Completed,
            }),
        }
    }
    Ok(out)
}

/// Draws `seeds_per_trajectory` start points from each trajectory and writes
/// `seeds.csv`.
pub fn sample_stage(config: &ExperimentConfig, trajectories: &[Trajectory]) -> Result<Vec<SeedPoint>> {
    let mut seeds = Vec::new();
    for traj in trajectories {
        let mut rng = SeededRng::with_stream(config.sampling_seed(traj.trajectory_id), 2);
        seeds.extend(sample_seeds(traj, config.seeds_per_trajectory, &mut rng)?);
    }
    let rows: Vec<files::SeedRow> = seeds
        .iter()
        .map(|s| files::SeedRow {
            trajectory_id: s.trajectory_id,
            seed_id: s.seed_id,
            epoch: s.epoch,
        })
        .collect();
    files::write_csv(&config.output_dir.join(files::SEEDS), &rows, files::SEED_HEADER)?;
    Ok(seeds)
}

pub fn load_seeds(dir: &Path) -> Result<Vec<SeedPoint>> {
    let rows: Vec<files::SeedRow> = files::read_csv(&dir.join(files::SEEDS))?;
    rows.into_iter()
        .map(|r| {
            Ok(SeedPoint {
                trajectory_id: r.trajectory_id,
                seed_id: r.seed_id,
                epoch: r.epoch,
                params: files::read_params(&dir.join(files::snapshot_path(r.trajectory_id, r.epoch)))?,
            })
        })
        .collect()
}

/// Runs every configured method from every seed in parallel, classifies the
/// end points, and writes `traces.csv` and an unmatched
/// `critical_points.csv`. Results are ordered by (method, trajectory, seed).
pub fn find_stage(config: &ExperimentConfig, data: &Dataset, seeds: &[SeedPoint]) -> Result<Vec<RunResult>> {
    let jobs: Vec<(Method, &SeedPoint)> = config
        .method_list()
        .into_iter()
        .flat_map(|m| seeds.iter().map(move |s| (m, s)))
        .collect();
    let mut runs: Vec<RunResult> = jobs
        .into_par_iter()
        .map(|(method, seed)| {
            let cfg = config.finders.get(method);
            let result = find(method, &seed.params, data, cfg)?;
            let record = classify_terminal(&result.terminal, data, config.tau_rel, cfg.epsilon_crit)?;
            Ok(RunResult {
                method,
                trajectory_id: seed.trajectory_id,
                seed_id: seed.seed_id,
                result,
                record,
            })
        })
        .collect::<Result<_>>()?;
    runs.sort_by_key(|r| (r.method, r.trajectory_id, r.seed_id));

    let traces: Vec<TraceRow> = runs
        .iter()
        .flat_map(|r| {
            r.result.run.records.iter().map(move |t| TraceRow {
                method: r.method,
                trajectory_id: r.trajectory_id,
                seed_id: r.seed_id,
                epoch: t.epoch,
                sq_grad_norm: t.sq_grad_norm,
                loss: t.loss,
                step_or_radius: t.step_or_radius(),
                inner_iters: t.inner_iters,
                accepted: t.accepted,
                status: r.result.run.status,
            })
        })
        .collect();
    files::write_csv(&config.output_dir.join(files::TRACES), &traces, files::TRACE_HEADER)?;
    write_critical_points(&config.output_dir, &critical_point_rows(&runs))?;
    Ok(runs)
}

pub fn critical_point_rows(runs: &[RunResult]) -> Vec<CriticalPointRow> {
    runs.iter()
        .map(|r| CriticalPointRow {
            method: r.method,
            trajectory_id: r.trajectory_id,
            seed_id: r.seed_id,
            terminal_sq_grad_norm: r.record.terminal_sq_grad_norm,
            loss: r.record.loss,
            index: r.record.index,
            nullity: r.record.nullity,
            converged: r.record.converged,
            matched_subset: String::new(),
        })
        .collect()
}

fn write_critical_points(dir: &Path, rows: &[CriticalPointRow]) -> Result<()> {
    files::write_csv(&dir.join(files::CRITICAL_POINTS), rows, files::CRITICAL_POINT_HEADER)
}

/// Matches the records, fills their `matched_subset`, and writes
/// `critical_points.csv` and `match_report.json`.
pub fn match_stage(
    config: &ExperimentConfig,
    catalog: &[CatalogPoint],
    rows: &mut [CriticalPointRow],
) -> Result<MatchReport> {
    let report = match_runs(rows, catalog, &config.matching);
    for (row, run) in rows.iter_mut().zip(&report.runs) {
        match &run.outcome {
            MatchOutcome::Matched { subset, .. } => {
                let subset = crate::catalog::parse_subset_label(subset)?;
                row.set_matched(Some(&subset));
            }
            MatchOutcome::Unmatched => row.set_matched(None),
        }
    }
    write_critical_points(&config.output_dir, rows)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(config.output_dir.join(files::MATCH_REPORT), text)?;
    for s in &report.summaries {
        log::info!(
            "{}: {}/{} converged, {} matched, {} distinct entries ({} saddles)",
            s.method,
            s.converged,
            s.runs,
            s.matched,
            s.distinct_entries,
            s.distinct_saddles
        );
    }
    Ok(report)
}

fn prepare(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    Ok(())
}

/// Runs one stage against the files already in the output directory and
/// updates the manifest. Failures are recorded there before being returned.
pub fn run_stage(config: &ExperimentConfig, stage: Stage) -> Result<()> {
    prepare(config).map_err(|e| Error::stage(stage.name(), e))?;
    let dir = config.output_dir.as_path();
    let mut manifest = Manifest::load_or_new(dir, config);
    let produced = run_stage_inner(config, stage);
    let outcome = produced.as_ref().map(|_| ()).map_err(|e| e.to_string());
    manifest.record_stage(stage.name(), outcome);
    if let Ok(paths) = &produced {
        manifest.record_files(dir, paths)?;
    }
    manifest.write(dir)?;
    produced.map(|_| ()).map_err(|e| Error::stage(stage.name(), e))
}

fn run_stage_inner(config: &ExperimentConfig, stage: Stage) -> Result<Vec<PathBuf>> {
    let dir = config.output_dir.as_path();
    match stage {
        Stage::GenData => {
            gen_data(config)?;
            Ok(vec![PathBuf::from(files::DATASET)])
        }
        Stage::Catalog => {
            let data = load_dataset(dir)?;
            let catalog = catalog_stage(config, &data)?;
            catalog_files(config, Some(&files::catalog_rows(&catalog)))
        }
        Stage::Train => {
            let data = load_dataset(dir)?;
            train_stage(config, &data)?;
            let rows: Vec<files::TrajectoryRow> = files::read_csv(&dir.join(files::TRAJECTORIES))?;
            Ok(trajectory_files(&rows))
        }
        Stage::SampleSeeds => {
            let trajectories = load_trajectories(dir, config)?;
            sample_stage(config, &trajectories)?;
            Ok(vec![PathBuf::from(files::SEEDS)])
        }
        Stage::Find => {
            let data = load_dataset(dir)?;
            let seeds = load_seeds(dir)?;
            find_stage(config, &data, &seeds)?;
            Ok(vec![PathBuf::from(files::TRACES), PathBuf::from(files::CRITICAL_POINTS)])
        }
        Stage::Match => {
            let catalog: Vec<CatalogRow> = files::read_csv(&dir.join(files::CATALOG))?;
            let mut rows: Vec<CriticalPointRow> = files::read_csv(&dir.join(files::CRITICAL_POINTS))?;
            match_stage(config, &CatalogPoint::from_rows(&catalog)?, &mut rows)?;
            Ok(vec![PathBuf::from(files::CRITICAL_POINTS), PathBuf::from(files::MATCH_REPORT)])
        }
        Stage::EmitPlots => {
            emit_plot_data(dir)?;
            Ok(vec![PathBuf::from(files::FIG1_TRACES), PathBuf::from(files::FIG1_SCATTER)])
        }
    }
}

/// Runs every stage in order in `config.output_dir`, starting from a fresh
/// manifest. On failure the manifest names the stage and earlier outputs are
/// left in place.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    prepare(config)?;
    let dir = config.output_dir.clone();
    let mut manifest = Manifest::new(config);

    macro_rules! stage {
        ($stage:expr, $body:expr, $files:expr) => {{
            let value = $body;
            match value {
                Ok(v) => {
                    manifest.record_stage($stage.name(), Ok(()));
                    let paths: Result<Vec<PathBuf>> = $files(&v);
                    manifest.record_files(&dir, &paths?)?;
                    v
                }
                Err(e) => {
                    manifest.record_stage($stage.name(), Err(e.to_string()));
                    manifest.write(&dir)?;
                    return Err(Error::stage($stage.name(), e));
                }
            }
        }};
    }

    let data = stage!(Stage::GenData, gen_data(config), |_: &Dataset| Ok(vec![
        PathBuf::from(files::DATASET)
    ]));
    let catalog = stage!(Stage::Catalog, catalog_stage(config, &data), |c: &Catalog| {
        catalog_files(config, Some(&files::catalog_rows(c)))
    });
    let trajectories = stage!(Stage::Train, train_stage(config, &data), |t: &Vec<Trajectory>| {
        let rows: Vec<files::TrajectoryRow> = t
            .iter()
            .flat_map(|traj| {
                traj.snapshots.iter().map(move |s| files::TrajectoryRow {
                    trajectory_id: traj.trajectory_id,
                    epoch: s.epoch,
                    loss: s.loss,
                    sq_grad_norm: s.sq_grad_norm,
                })
            })
            .collect();
        Ok(trajectory_files(&rows))
    });
    let seeds = stage!(Stage::SampleSeeds, sample_stage(config, &trajectories), |_: &Vec<SeedPoint>| Ok(
        vec![PathBuf::from(files::SEEDS)]
    ));
    let runs = stage!(Stage::Find, find_stage(config, &data, &seeds), |_: &Vec<RunResult>| Ok(vec![
        PathBuf::from(files::TRACES),
        PathBuf::from(files::CRITICAL_POINTS)
    ]));
    let mut critical_points = critical_point_rows(&runs);
    let points = CatalogPoint::from_catalog(&catalog);
    let report = stage!(
        Stage::Match,
        match_stage(config, &points, &mut critical_points),
        |_: &MatchReport| Ok(vec![
            PathBuf::from(files::CRITICAL_POINTS),
            PathBuf::from(files::MATCH_REPORT)
        ])
    );
    stage!(Stage::EmitPlots, emit_plot_data(&dir), |_: &()| Ok(vec![
        PathBuf::from(files::FIG1_TRACES),
        PathBuf::from(files::FIG1_SCATTER)
    ]));
    manifest.write(&dir)?;

    Ok(ExperimentOutcome {
        dir,
        data,
        catalog,
        trajectories,
        seeds,
        runs,
        critical_points,
        report,
        manifest,
    })
}
