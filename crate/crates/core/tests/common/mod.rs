//! Shared fixtures for the integration suites.

use std::path::{Path, PathBuf};

use absa_core::corpus::Dataset;
use absa_core::runner::{load_dataset_dir, ClientSpec, RunConfig};
use absa_core::task::TaskKind;

pub fn fixture_dataset_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dataset")
}

pub fn fixture_candidates(task: TaskKind) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/candidates")
        .join(format!("{}.jsonl", task.label().to_lowercase()))
}

#[allow(dead_code)] // not every test target uses the loaded form
pub fn load_fixture() -> Dataset {
    load_dataset_dir(&fixture_dataset_dir(), Some("FIXTURE")).expect("fixture loads")
}

/// A fixture run config: oracle-free defaults, candidates wired for the
/// task, artifacts under `out`.
pub fn fixture_config(task: TaskKind, out: &Path) -> RunConfig {
    let mut config = RunConfig::new(fixture_dataset_dir(), task);
    config.dataset_name = Some("FIXTURE".into());
    config.candidate_paths = vec![fixture_candidates(task)];
    config.shots = 3;
    config.ensemble = 1;
    config.client = ClientSpec::Oracle;
    config.out_dir = out.to_path_buf();
    config
}
