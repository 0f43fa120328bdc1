//! Run configuration: programmatic defaults, TOML file loading, and the
//! merge rule (file first, explicit overrides on top).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::candidates::SelectConfig;
use crate::embed::{EmbedderConfig, ProviderKind};
use crate::gateway::{DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use crate::normalize::AlignMode;
use crate::task::TaskKind;

use super::RunnerError;

/// Which chat client a run uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientSpec {
    Remote,
    Oracle,
    Empty,
    Replay { map_path: PathBuf },
}

impl ClientSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ClientSpec::Remote => "remote",
            ClientSpec::Oracle => "oracle",
            ClientSpec::Empty => "empty",
            ClientSpec::Replay { .. } => "replay",
        }
    }
}

/// What to do when a test example has no candidate record while candidate
/// hints are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePolicy {
    /// Render the prompt without a candidates block (default).
    Omit,
    /// Abort the run.
    Fail,
}

impl std::str::FromStr for CandidatePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "omit" => Ok(CandidatePolicy::Omit),
            "fail" => Ok(CandidatePolicy::Fail),
            other => Err(format!("unknown candidate policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory holding the evaluated dataset (`{train,dev,test}.{txt,xml,jsonl}`).
    pub dataset_dir: PathBuf,
    /// Label override; defaults to the directory basename.
    pub dataset_name: Option<String>,
    /// Shot/candidate source dataset for transfer runs; defaults to
    /// `dataset_dir`.
    pub shot_dataset_dir: Option<PathBuf>,
    pub shot_dataset_name: Option<String>,
    pub candidate_paths: Vec<PathBuf>,
    pub task: TaskKind,
    /// K: shots per prompt.
    pub shots: usize,
    /// T: ensemble groups per instance.
    pub ensemble: usize,
    /// Candidate hints enabled (`--no-hcs` clears this).
    pub hcs: bool,
    pub client: ClientSpec,
    pub model: String,
    pub endpoint: Option<String>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub cache_dir: Option<PathBuf>,
    /// Reserved for stochastic clients; the offline pipeline is deterministic.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub align: AlignMode,
    pub candidate_policy: CandidatePolicy,
    pub embedder: EmbedderConfig,
    pub max_in_flight: usize,
    pub select: SelectConfig,
}

impl RunConfig {
    pub fn new(dataset_dir: impl Into<PathBuf>, task: TaskKind) -> Self {
        RunConfig {
            dataset_dir: dataset_dir.into(),
            dataset_name: None,
            shot_dataset_dir: None,
            shot_dataset_name: None,
            candidate_paths: Vec::new(),
            task,
            shots: 5,
            ensemble: 1,
            hcs: true,
            client: ClientSpec::Empty,
            model: "gpt-3.5-turbo".into(),
            endpoint: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            cache_dir: None,
            seed: 42,
            out_dir: PathBuf::from("out"),
            align: AlignMode::String,
            candidate_policy: CandidatePolicy::Omit,
            embedder: EmbedderConfig::default(),
            max_in_flight: 4,
            select: SelectConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.ensemble < 1 {
            return Err(RunnerError::Config("ensemble (T) must be >= 1".into()));
        }
        if !self.dataset_dir.is_dir() {
            return Err(RunnerError::Config(format!(
                "dataset directory {} does not exist",
                self.dataset_dir.display()
            )));
        }
        if let Some(dir) = &self.shot_dataset_dir {
            if !dir.is_dir() {
                return Err(RunnerError::Config(format!(
                    "shot dataset directory {} does not exist",
                    dir.display()
                )));
            }
        }
        for path in &self.candidate_paths {
            if !path.is_file() {
                return Err(RunnerError::Config(format!(
                    "candidate file {} does not exist",
                    path.display()
                )));
            }
        }
        if let ClientSpec::Replay { map_path } = &self.client {
            if !map_path.is_file() {
                return Err(RunnerError::Config(format!(
                    "replay map {} does not exist",
                    map_path.display()
                )));
            }
        }
        if self.client == ClientSpec::Remote && self.endpoint.is_none() {
            return Err(RunnerError::Config(
                "remote client needs --endpoint or LLM_ENDPOINT".into(),
            ));
        }
        if self.hcs
            && self.candidate_policy == CandidatePolicy::Fail
            && self.candidate_paths.is_empty()
        {
            return Err(RunnerError::Config(
                "candidate-policy=fail requires at least one candidate file".into(),
            ));
        }
        self.embedder
            .validate()
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        Ok(())
    }
}

/// TOML mirror of the CLI flags. All fields optional; unset fields keep the
/// base config's value.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub dataset_name: Option<String>,
    pub shot_dataset: Option<PathBuf>,
    pub shot_dataset_name: Option<String>,
    pub candidates: Option<Vec<PathBuf>>,
    pub task: Option<String>,
    pub shots: Option<usize>,
    pub ensemble: Option<usize>,
    pub no_hcs: Option<bool>,
    pub client: Option<String>,
    pub replay_map: Option<PathBuf>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub cache: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub align: Option<String>,
    pub candidate_policy: Option<String>,
    pub max_in_flight: Option<usize>,
    pub embed_provider: Option<String>,
    pub embed_dimension: Option<usize>,
    pub embed_ngram_min: Option<usize>,
    pub embed_ngram_max: Option<usize>,
    pub embed_endpoint: Option<String>,
    pub embed_model: Option<String>,
    pub embed_pooling: Option<String>,
    pub min_confidence: Option<f64>,
    pub max_candidates: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let raw = std::fs::read_to_string(path)?;
        toml::from_str(&raw).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies every set field onto `config`. The client string is resolved
    /// together with `replay_map`.
    pub fn apply(&self, config: &mut RunConfig) -> Result<(), RunnerError> {
        if let Some(v) = &self.dataset {
            config.dataset_dir = v.clone();
        }
        if let Some(v) = &self.dataset_name {
            config.dataset_name = Some(v.clone());
        }
        if let Some(v) = &self.shot_dataset {
            config.shot_dataset_dir = Some(v.clone());
        }
        if let Some(v) = &self.shot_dataset_name {
            config.shot_dataset_name = Some(v.clone());
        }
        if let Some(v) = &self.candidates {
            config.candidate_paths = v.clone();
        }
        if let Some(v) = &self.task {
            config.task = v.parse().map_err(RunnerError::Config)?;
        }
        if let Some(v) = self.shots {
            config.shots = v;
        }
        if let Some(v) = self.ensemble {
            config.ensemble = v;
        }
        if let Some(v) = self.no_hcs {
            config.hcs = !v;
        }
        if let Some(v) = &self.client {
            config.client = resolve_client(v, self.replay_map.as_deref())?;
        }
        if let Some(v) = &self.model {
            config.model = v.clone();
        }
        if let Some(v) = &self.endpoint {
            config.endpoint = Some(v.clone());
        }
        if let Some(v) = self.max_tokens {
            config.max_tokens = v;
        }
        if let Some(v) = self.temperature {
            config.temperature = v;
        }
        if let Some(v) = &self.cache {
            config.cache_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.out {
            config.out_dir = v.clone();
        }
        if let Some(v) = &self.align {
            config.align = v.parse().map_err(RunnerError::Config)?;
        }
        if let Some(v) = &self.candidate_policy {
            config.candidate_policy = v.parse().map_err(RunnerError::Config)?;
        }
        if let Some(v) = self.max_in_flight {
            config.max_in_flight = v;
        }
        if let Some(v) = &self.embed_provider {
            config.embedder.provider = match v.as_str() {
                "local-ngram" => ProviderKind::LocalNgram,
                "remote" => ProviderKind::Remote,
                other => {
                    return Err(RunnerError::Config(format!(
                        "unknown embed provider {other:?}"
                    )))
                }
            };
        }
        if let Some(v) = self.embed_dimension {
            config.embedder.dimension = v;
        }
        if let Some(v) = self.embed_ngram_min {
            config.embedder.ngram_min = v;
        }
        if let Some(v) = self.embed_ngram_max {
            config.embedder.ngram_max = v;
        }
        if let Some(v) = &self.embed_endpoint {
            config.embedder.endpoint = Some(v.clone());
        }
        if let Some(v) = &self.embed_model {
            config.embedder.model = Some(v.clone());
        }
        if let Some(v) = &self.embed_pooling {
            config.embedder.pooling = Some(v.clone());
        }
        if let Some(v) = self.min_confidence {
            config.select.min_confidence = v;
        }
        if let Some(v) = self.max_candidates {
            config.select.max_items = v;
        }
        Ok(())
    }
}

/// Maps a client name (plus optional replay map path) to a `ClientSpec`.
pub fn resolve_client(name: &str, replay_map: Option<&Path>) -> Result<ClientSpec, RunnerError> {
    match name {
        "remote" => Ok(ClientSpec::Remote),
        "oracle" => Ok(ClientSpec::Oracle),
        "empty" => Ok(ClientSpec::Empty),
        "replay" => {
            let map_path = replay_map.ok_or_else(|| {
                RunnerError::Config("client=replay requires --replay-map".into())
            })?;
            Ok(ClientSpec::Replay {
                map_path: map_path.to_path_buf(),
            })
        }
        other => Err(RunnerError::Config(format!("unknown client {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_config_overrides_base_values() {
        let file: FileConfig = toml::from_str(
            r#"
task = "aope"
shots = 9
ensemble = 3
no-hcs = true
client = "empty"
align = "strict-span"
candidate-policy = "fail"
embed-dimension = 256
"#,
        )
        .unwrap();
        let mut config = RunConfig::new("fixtures", TaskKind::Aste);
        file.apply(&mut config).unwrap();
        assert_eq!(config.task, TaskKind::Aope);
        assert_eq!(config.shots, 9);
        assert_eq!(config.ensemble, 3);
        assert!(!config.hcs);
        assert_eq!(config.align, AlignMode::StrictSpan);
        assert_eq!(config.candidate_policy, CandidatePolicy::Fail);
        assert_eq!(config.embedder.dimension, 256);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let parsed: Result<FileConfig, _> = toml::from_str("bogus-key = 1");
        assert!(parsed.is_err());
    }

    #[test]
    fn replay_client_requires_a_map() {
        assert!(resolve_client("replay", None).is_err());
        let spec = resolve_client("replay", Some(Path::new("map.jsonl"))).unwrap();
        assert_eq!(spec.label(), "replay");
    }
}
