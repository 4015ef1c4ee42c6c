use std::path::{Path, PathBuf};

use dlae_core::experiment::files::{self, read_csv};
use dlae_core::experiment::{
    run_experiment, run_stage, CatalogRow, CriticalPointRow, ExperimentConfig, Fig1ScatterRow, Layer, Manifest,
    Stage, StageStatus, file_sha256,
};
use dlae_core::finders::Method;

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        seed: 7,
        widths: vec![4, 2, 4],
        seeds_per_trajectory: 2,
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    c.data.n_samples = 32;
    c.trajectories.count = 2;
    c.trajectories.epochs = 200;
    c.trajectories.snapshot_every = 20;
    c.finders.gnm.max_epochs = 100;
    c
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(files::MANIFEST)).unwrap()).unwrap()
}

const COMPARED: &[&str] = &[
    files::DATASET,
    files::CATALOG,
    files::TRAJECTORIES,
    files::SEEDS,
    files::TRACES,
    files::CRITICAL_POINTS,
    files::MATCH_REPORT,
    files::FIG1_TRACES,
    files::FIG1_SCATTER,
];

#[test]
fn one_method_one_trajectory_one_seed_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_config(tmp.path());
    c.methods = vec![Method::Gnm];
    c.trajectories.count = 1;
    c.seeds_per_trajectory = 1;
    let outcome = run_experiment(&c).unwrap();
    assert_eq!(outcome.critical_points.len(), 1);
    let rows: Vec<CriticalPointRow> = read_csv(&tmp.path().join(files::CRITICAL_POINTS)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].method, Method::Gnm);
    assert_eq!(rows[0].converged, rows[0].terminal_sq_grad_norm <= 1e-10);
}

#[test]
fn stage_by_stage_matches_run_all() {
    let all = tempfile::tempdir().unwrap();
    let staged = tempfile::tempdir().unwrap();
    run_experiment(&small_config(all.path())).unwrap();
    let c = small_config(staged.path());
    for stage in Stage::ALL {
        run_stage(&c, stage).unwrap();
    }
    for name in COMPARED {
        let a = std::fs::read(all.path().join(name)).unwrap();
        let b = std::fs::read(staged.path().join(name)).unwrap();
        assert!(a == b, "{name} differs between run-all and stage-by-stage");
    }

    let manifest = read_manifest(staged.path());
    assert_eq!(manifest.stages.len(), Stage::ALL.len());
    assert!(manifest.stages.iter().all(|s| s.status == StageStatus::Ok));
    assert_eq!(manifest.config.trajectories.init_seeds, Some(vec![7, 8]));
}

#[test]
fn manifest_hashes_match_the_files() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&small_config(tmp.path())).unwrap();
    let manifest = read_manifest(tmp.path());
    for name in COMPARED {
        assert!(manifest.files.contains_key(*name), "{name} missing from manifest");
    }
    assert!(manifest.files.keys().any(|k| k.starts_with(files::SNAPSHOTS_DIR)));
    for (name, digest) in &manifest.files {
        let actual = file_sha256(&tmp.path().join(name)).unwrap();
        assert_eq!(&actual, digest, "{name}");
    }
}

#[test]
fn failed_stage_is_named_in_error_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_config(tmp.path());
    run_stage(&c, Stage::GenData).unwrap();
    // no seeds.csv yet
    let err = run_stage(&c, Stage::Find).unwrap_err();
    assert!(err.to_string().contains("find"), "{err}");
    let manifest = read_manifest(tmp.path());
    let failed: Vec<_> = manifest.failed_stages().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].stage, "find");
    assert!(failed[0].error.is_some());
    assert!(!tmp.path().join(files::CRITICAL_POINTS).exists());
}

#[test]
fn scatter_recovered_layer_is_exactly_the_converged_runs() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&small_config(tmp.path())).unwrap();
    let dir: PathBuf = tmp.path().into();
    let points: Vec<CriticalPointRow> = read_csv(&dir.join(files::CRITICAL_POINTS)).unwrap();
    let scatter: Vec<Fig1ScatterRow> = read_csv(&dir.join(files::FIG1_SCATTER)).unwrap();
    let catalog: Vec<CatalogRow> = read_csv(&dir.join(files::CATALOG)).unwrap();

    // 4-choose-≤2 subsets
    assert_eq!(catalog.len(), 11);
    assert_eq!(scatter.iter().filter(|r| r.layer == Layer::Catalog).count(), catalog.len());

    let mut converged: Vec<_> = points
        .iter()
        .filter(|p| p.converged)
        .map(|p| (p.method, p.trajectory_id, p.seed_id))
        .collect();
    let mut recovered: Vec<_> = scatter
        .iter()
        .filter(|r| r.layer == Layer::Recovered)
        .map(|r| (r.method.unwrap(), r.trajectory_id.unwrap(), r.seed_id.unwrap()))
        .collect();
    converged.sort();
    recovered.sort();
    assert_eq!(converged, recovered);
    assert!(!converged.is_empty());
    for p in points.iter().filter(|p| p.converged) {
        assert!(p.matched().is_some(), "converged run left unmatched: {p:?}");
    }
}
