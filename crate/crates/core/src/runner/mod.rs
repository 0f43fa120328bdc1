//! End-to-end orchestration: load datasets and candidates, select shots,
//! build prompts, complete them through the gateway, normalize and score,
//! and write the report/audit artifacts. Also hosts the shot-size sweep and
//! cross-dataset transfer entry points.

mod config;
mod parallel;
mod sweep;

pub use config::{resolve_client, CandidatePolicy, ClientSpec, FileConfig, RunConfig};
pub use parallel::parallel_map;
pub use sweep::{quad_fit, sweep_csv, sweep_svg, QuadFit, SweepPoint, SweepResult};

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{CandidateError, CandidateHeader, CandidateStore};
use crate::corpus::{
    from_canonical_jsonl, parse_aste_v2, parse_mams_atsa, CorpusError, Dataset, DatasetName,
    Example, Split,
};
use crate::embed::{EmbedError, TextEmbedder};
use crate::gateway::{
    sha256_hex, ChatClient, CompletionRequest, EmptyClient, Gateway, GatewayError, OracleClient,
    RemoteClient, ReplayClient, RequestTag, ResponseCache,
};
use crate::normalize::{
    align_to_sentence, parse_output, union_ensemble, AlignMode, NormalizeError,
    NormalizedPrediction,
};
use crate::prompt::{build_prompt, head_for, PromptBundle, PromptContext, PromptError};
use crate::score::{score, ExampleScore, MatchCounts, MetricsReport, ScoreError};
use crate::shots::{partition_groups, rank_shots, ShotError, ShotGroup, ShotPool, ShotSelection};
use crate::task::{expand_instances, gold_target, GoldTarget, TaskError, TaskInstance, TaskKind};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Shots(#[from] ShotError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error("task {task} is unsupported on dataset {dataset}: opinion annotations are absent")]
    Unsupported { task: TaskKind, dataset: String },
    #[error("test example {0} has no candidate record and candidate-policy is fail")]
    MissingCandidates(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads a dataset from a directory holding per-split files named
/// `{train,dev,test}.txt` (ASTE-V2), `.xml` (MAMS ATSA), or `.jsonl`
/// (canonical). Missing splits stay empty. XML splits force the MAMS name
/// since their ids carry it.
pub fn load_dataset_dir(dir: &Path, name_override: Option<&str>) -> Result<Dataset, RunnerError> {
    let base_name = match name_override {
        Some(n) => n.to_string(),
        None => dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("DATASET")
            .to_string(),
    };
    let mut dataset = Dataset::new(DatasetName::parse(&base_name));
    let mut canonical_chunks = String::new();
    let mut found_any = false;
    let mut found_xml = false;

    for split in Split::ALL {
        let txt = dir.join(format!("{}.txt", split.label()));
        let xml = dir.join(format!("{}.xml", split.label()));
        let jsonl = dir.join(format!("{}.jsonl", split.label()));
        if txt.is_file() {
            let content = fs::read_to_string(&txt)?;
            *dataset.split_mut(split) = parse_aste_v2(&content, &dataset.name, split)?;
            found_any = true;
        } else if xml.is_file() {
            let content = fs::read_to_string(&xml)?;
            *dataset.split_mut(split) = parse_mams_atsa(&content, split)?;
            found_any = true;
            found_xml = true;
        } else if jsonl.is_file() {
            canonical_chunks.push_str(&fs::read_to_string(&jsonl)?);
            found_any = true;
        }
    }
    if !found_any {
        return Err(RunnerError::Config(format!(
            "no dataset files ({{train,dev,test}}.{{txt,xml,jsonl}}) found in {}",
            dir.display()
        )));
    }
    if found_xml {
        // MAMS ids are fixed by the parser.
        let mams = Dataset::new(DatasetName::Mams);
        dataset.name = mams.name;
        dataset.domain = mams.domain;
    }
    if !canonical_chunks.is_empty() {
        let parsed = from_canonical_jsonl(&canonical_chunks)?;
        if parsed.name != dataset.name && !found_xml && name_override.is_some() {
            return Err(RunnerError::Config(format!(
                "canonical ids belong to {} but dataset name is {}",
                parsed.name, dataset.name
            )));
        }
        let name_from_ids = parsed.name.clone();
        for split in Split::ALL {
            if !parsed.split(split).is_empty() {
                *dataset.split_mut(split) = parsed.split(split).to_vec();
            }
        }
        if name_override.is_none() {
            dataset.domain = name_from_ids.domain();
            dataset.name = name_from_ids;
        }
    }
    Ok(dataset)
}

/// One shot-selection audit record, serialized per test example.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionRecord {
    pub query_id: String,
    pub ranked: Vec<(String, f64)>,
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AuditLine {
    pub instance_id: String,
    pub group: usize,
    pub shot_ids: Vec<String>,
    pub prompt_sha256: String,
    pub prompt: String,
    pub response: String,
    pub cache_hit: bool,
    pub client: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// ALSC instances excluded because their gold polarity is ambiguous.
    pub ambiguous_instances: Vec<String>,
    /// ALSC instances whose query string occurs at several aspect positions
    /// of the same sentence; a model queried by string cannot tell them
    /// apart, so their scores are unreliable.
    pub string_collision_instances: Vec<String>,
    pub rejected_line_count: usize,
    pub flagged_item_count: usize,
    /// Test examples whose shot request exceeded the pool size.
    pub truncated_selections: usize,
    /// Fraction of shot-pool train / evaluated test examples that have a
    /// candidate record; absent when no candidate files were loaded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_coverage: Option<crate::candidates::CoverageReport>,
}

/// The report JSON written by every run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub task: TaskKind,
    pub model: String,
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates_dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_dataset: Option<String>,
    pub shots: usize,
    pub ensemble: usize,
    pub hcs: bool,
    pub align: AlignMode,
    pub client: String,
    pub counts: MatchCounts,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub per_example: Vec<ExampleScore>,
    pub diagnostics: Diagnostics,
}

impl RunReport {
    pub fn csv_header() -> &'static str {
        "task,model,dataset,shots,ensemble,tp,predicted,gold,p,r,f1"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.2},{:.2},{:.2}",
            self.task,
            self.model,
            self.dataset,
            self.shots,
            self.ensemble,
            self.counts.tp,
            self.counts.predicted,
            self.counts.gold,
            self.p,
            self.r,
            self.f1
        )
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub report_json_path: PathBuf,
    pub report_csv_path: PathBuf,
    pub audit_path: PathBuf,
    pub shots_path: PathBuf,
    /// Underlying client invocations (0 on a fully warm cache).
    pub client_calls: u64,
}

struct InstanceEntry {
    example_index: usize,
    instance: TaskInstance,
    gold: GoldTarget,
}

struct ExpandedInstances {
    entries: Vec<InstanceEntry>,
    /// ALSC instances excluded for ambiguous gold.
    ambiguous: Vec<String>,
    /// ALSC instances whose query string repeats within the sentence.
    string_collisions: Vec<String>,
}

struct WorkItem {
    instance_index: usize,
    example_index: usize,
    bundle: PromptBundle,
    request: CompletionRequest,
}

/// Loaded inputs shared by `run`, `select-shots`, and `build-prompts`.
struct Pipeline {
    config: RunConfig,
    test_dataset: Dataset,
    shot_dataset: Option<Dataset>,
    store: Option<CandidateStore>,
}

impl Pipeline {
    fn load(config: &RunConfig) -> Result<Self, RunnerError> {
        config.validate()?;
        let test_dataset = load_dataset_dir(&config.dataset_dir, config.dataset_name.as_deref())?;
        let shot_dataset = match &config.shot_dataset_dir {
            Some(dir) => Some(load_dataset_dir(dir, config.shot_dataset_name.as_deref())?),
            None => None,
        };

        let shot_ds = shot_dataset.as_ref().unwrap_or(&test_dataset);
        if config.task != TaskKind::Alsc {
            for ds in [&test_dataset, shot_ds] {
                if !ds.has_opinion_spans() {
                    return Err(RunnerError::Unsupported {
                        task: config.task,
                        dataset: ds.name.label().to_string(),
                    });
                }
            }
        }
        if test_dataset.test.is_empty() {
            return Err(RunnerError::Config(format!(
                "test split of {} is empty",
                test_dataset.name
            )));
        }

        let store = if config.candidate_paths.is_empty() {
            None
        } else {
            let mut store = CandidateStore::new();
            for path in &config.candidate_paths {
                let content = fs::read_to_string(path)?;
                let header_line = content
                    .lines()
                    .find(|l| !l.trim().is_empty())
                    .ok_or_else(|| RunnerError::Config(format!("{} is empty", path.display())))?;
                let header: CandidateHeader =
                    serde_json::from_str(header_line).map_err(|e| {
                        RunnerError::Config(format!("{}: bad header: {e}", path.display()))
                    })?;
                let target = if header.dataset == shot_ds.name.label() {
                    shot_ds
                } else if header.dataset == test_dataset.name.label() {
                    &test_dataset
                } else {
                    return Err(RunnerError::Config(format!(
                        "{}: candidate header names dataset {:?}, expected {:?} or {:?}",
                        path.display(),
                        header.dataset,
                        shot_ds.name.label(),
                        test_dataset.name.label()
                    )));
                };
                store.load(&content, target, config.task)?;
            }
            Some(store)
        };

        Ok(Pipeline {
            config: config.clone(),
            test_dataset,
            shot_dataset,
            store,
        })
    }

    fn shot_ds(&self) -> &Dataset {
        self.shot_dataset.as_ref().unwrap_or(&self.test_dataset)
    }

    /// Shot selection and grouping for every test example, in split order.
    fn selections(&self) -> Result<Vec<(ShotSelection, Vec<ShotGroup>)>, RunnerError> {
        let config = &self.config;
        let mut out = Vec::with_capacity(self.test_dataset.test.len());
        if config.shots == 0 {
            for example in &self.test_dataset.test {
                let selection = ShotSelection {
                    query_id: example.id.clone(),
                    ranked: Vec::new(),
                    truncated: false,
                };
                let groups = (0..config.ensemble)
                    .map(|group_index| ShotGroup {
                        group_index,
                        member_ids: Vec::new(),
                    })
                    .collect();
                out.push((selection, groups));
            }
            return Ok(out);
        }
        let embedder = TextEmbedder::new(config.embedder.clone())?;
        let pool = ShotPool::build(&self.shot_ds().train, &embedder)?;
        let limit = config.shots * config.ensemble;
        for example in &self.test_dataset.test {
            let selection = rank_shots(example, &pool, &embedder, limit)?;
            let groups = partition_groups(&selection, config.shots, config.ensemble)?;
            out.push((selection, groups));
        }
        Ok(out)
    }

    /// Expands test instances with their gold targets. Ambiguous ALSC
    /// instances are excluded and surfaced in the diagnostics, instances
    /// whose query string repeats within the sentence are kept but flagged.
    fn instances(&self) -> Result<ExpandedInstances, RunnerError> {
        let mut entries = Vec::new();
        let mut ambiguous = Vec::new();
        let mut collisions = Vec::new();
        for (example_index, example) in self.test_dataset.test.iter().enumerate() {
            let instances = expand_instances(example, self.config.task)?;
            if self.config.task == TaskKind::Alsc {
                let mut by_term: HashMap<&str, Vec<&str>> = HashMap::new();
                for instance in &instances {
                    if let Some(query) = &instance.query {
                        by_term
                            .entry(query.term.as_str())
                            .or_default()
                            .push(instance.instance_id.as_str());
                    }
                }
                for instance in &instances {
                    let term = instance.query.as_ref().expect("ALSC has a query");
                    if by_term[term.term.as_str()].len() > 1 {
                        collisions.push(instance.instance_id.clone());
                    }
                }
            }
            for instance in instances {
                match gold_target(example, &instance) {
                    Ok(gold) => entries.push(InstanceEntry {
                        example_index,
                        instance,
                        gold,
                    }),
                    Err(TaskError::AmbiguousPolarity { .. }) => {
                        ambiguous.push(instance.instance_id.clone());
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(ExpandedInstances {
            entries,
            ambiguous,
            string_collisions: collisions,
        })
    }

    fn work_items(
        &self,
        selections: &[(ShotSelection, Vec<ShotGroup>)],
        entries: &[InstanceEntry],
    ) -> Result<Vec<WorkItem>, RunnerError> {
        let config = &self.config;
        if config.hcs && config.candidate_policy == CandidatePolicy::Fail {
            if let Some(store) = &self.store {
                for example in &self.test_dataset.test {
                    if store.get(&example.id).is_none() {
                        return Err(RunnerError::MissingCandidates(example.id.clone()));
                    }
                }
            }
        }

        let pool_map: HashMap<&str, &Example> = self
            .shot_ds()
            .train
            .iter()
            .map(|e| (e.id.as_str(), e))
            .collect();
        let context = PromptContext {
            task: config.task,
            pool: &pool_map,
            candidates: self.store.as_ref(),
            select: config.select,
            hcs_enabled: config.hcs,
        };
        let head = head_for(config.task);

        let mut work = Vec::with_capacity(entries.len() * config.ensemble);
        for (instance_index, entry) in entries.iter().enumerate() {
            let example = &self.test_dataset.test[entry.example_index];
            let (_, groups) = &selections[entry.example_index];
            for group in groups {
                let bundle = build_prompt(head, group, &context, example, &entry.instance)?;
                let request = CompletionRequest {
                    model: config.model.clone(),
                    prompt: bundle.text.clone(),
                    max_tokens: config.max_tokens,
                    temperature: config.temperature,
                    tag: RequestTag {
                        instance_id: entry.instance.instance_id.clone(),
                        task: config.task,
                        group: group.group_index,
                    },
                };
                work.push(WorkItem {
                    instance_index,
                    example_index: entry.example_index,
                    bundle,
                    request,
                });
            }
        }
        Ok(work)
    }

    fn build_gateway(&self) -> Result<Gateway, RunnerError> {
        let config = &self.config;
        let client: Box<dyn ChatClient> = match &config.client {
            ClientSpec::Remote => {
                let endpoint = config
                    .endpoint
                    .clone()
                    .or_else(|| std::env::var("LLM_ENDPOINT").ok())
                    .ok_or_else(|| {
                        RunnerError::Config("remote client needs --endpoint or LLM_ENDPOINT".into())
                    })?;
                Box::new(RemoteClient::new(&endpoint))
            }
            ClientSpec::Oracle => Box::new(OracleClient::new(&self.test_dataset)),
            ClientSpec::Empty => Box::new(EmptyClient),
            ClientSpec::Replay { map_path } => {
                let content = fs::read_to_string(map_path)?;
                Box::new(ReplayClient::from_jsonl(&content).map_err(RunnerError::Config)?)
            }
        };
        let cache = match &config.cache_dir {
            Some(dir) => Some(ResponseCache::new(dir)?),
            None => None,
        };
        Ok(Gateway::new(client, cache))
    }
}

pub fn run(config: &RunConfig) -> Result<RunArtifacts, RunnerError> {
    let pipeline = Pipeline::load(config)?;
    let selections = pipeline.selections()?;
    let expanded = pipeline.instances()?;
    let entries = expanded.entries;
    let work = pipeline.work_items(&selections, &entries)?;
    let gateway = pipeline.build_gateway()?;

    let outcomes = parallel_map(&work, config.max_in_flight, |item| {
        gateway.complete(&item.request)
    });
    let mut completions = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        completions.push(outcome?);
    }

    // Group responses per instance; work items were generated instance-major
    // and parallel_map preserves order, so groups arrive in index order.
    let mut grouped: Vec<Vec<NormalizedPrediction>> = (0..entries.len()).map(|_| Vec::new()).collect();
    for (item, completion) in work.iter().zip(&completions) {
        let parsed = parse_output(&completion.text, config.task, &item.request.tag.instance_id);
        let example = &pipeline.test_dataset.test[item.example_index];
        let aligned = align_to_sentence(parsed, example, config.align);
        grouped[item.instance_index].push(aligned);
    }

    let mut predictions = std::collections::BTreeMap::new();
    let mut golds = std::collections::BTreeMap::new();
    let mut rejected_line_count = 0usize;
    let mut flagged_item_count = 0usize;
    for (entry, groups) in entries.iter().zip(&grouped) {
        let merged = union_ensemble(groups, config.task)?;
        rejected_line_count += merged.lines_rejected.len();
        flagged_item_count += merged.flags.len();
        predictions.insert(entry.instance.instance_id.clone(), merged);
        golds.insert(entry.instance.instance_id.clone(), entry.gold.clone());
    }
    let metrics = score(&predictions, &golds, config.task)?;

    let shot_label = pipeline.shot_ds().name.label().to_string();
    let test_label = pipeline.test_dataset.name.label().to_string();
    let is_transfer = shot_label != test_label;
    let report = RunReport {
        task: config.task,
        model: config.model.clone(),
        dataset: test_label.clone(),
        candidates_dataset: is_transfer.then(|| shot_label.clone()),
        test_dataset: is_transfer.then(|| test_label.clone()),
        shots: config.shots,
        ensemble: config.ensemble,
        hcs: config.hcs,
        align: config.align,
        client: config.client.label().to_string(),
        counts: metrics.counts,
        p: metrics.p,
        r: metrics.r,
        f1: metrics.f1,
        per_example: metrics.per_example,
        diagnostics: Diagnostics {
            ambiguous_instances: expanded.ambiguous,
            string_collision_instances: expanded.string_collisions,
            rejected_line_count,
            flagged_item_count,
            truncated_selections: selections.iter().filter(|(s, _)| s.truncated).count(),
            candidate_coverage: pipeline.store.as_ref().map(|store| {
                let fraction = |examples: &[Example]| {
                    if examples.is_empty() {
                        0.0
                    } else {
                        examples.iter().filter(|e| store.get(&e.id).is_some()).count() as f64
                            / examples.len() as f64
                    }
                };
                crate::candidates::CoverageReport {
                    train: fraction(&pipeline.shot_ds().train),
                    test: fraction(&pipeline.test_dataset.test),
                }
            }),
        },
    };

    fs::create_dir_all(&config.out_dir)?;
    let report_json_path = config.out_dir.join("report.json");
    fs::write(
        &report_json_path,
        format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")),
    )?;
    let report_csv_path = config.out_dir.join("report.csv");
    fs::write(
        &report_csv_path,
        format!("{}\n{}\n", RunReport::csv_header(), report.csv_row()),
    )?;

    let audit_path = config.out_dir.join("audit.jsonl");
    let mut audit = String::new();
    for (item, completion) in work.iter().zip(&completions) {
        let line = AuditLine {
            instance_id: item.request.tag.instance_id.clone(),
            group: item.request.tag.group,
            shot_ids: item.bundle.shot_ids.clone(),
            prompt_sha256: sha256_hex(item.request.prompt.as_bytes()),
            prompt: item.request.prompt.clone(),
            response: completion.text.clone(),
            cache_hit: completion.cache_hit,
            client: completion.client.clone(),
        };
        audit.push_str(&serde_json::to_string(&line).expect("audit serializes"));
        audit.push('\n');
    }
    fs::write(&audit_path, audit)?;

    let shots_path = config.out_dir.join("shots.jsonl");
    fs::write(&shots_path, selection_jsonl(&selections))?;

    Ok(RunArtifacts {
        report,
        report_json_path,
        report_csv_path,
        audit_path,
        shots_path,
        client_calls: gateway.client_calls(),
    })
}

fn selection_jsonl(selections: &[(ShotSelection, Vec<ShotGroup>)]) -> String {
    let mut out = String::new();
    for (selection, groups) in selections {
        let record = SelectionRecord {
            query_id: selection.query_id.clone(),
            ranked: selection.ranked.clone(),
            groups: groups.iter().map(|g| g.member_ids.clone()).collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("selection serializes"));
        out.push('\n');
    }
    out
}

/// `select-shots`: the shot-selection audit JSONL without running anything.
pub fn select_shots_audit(config: &RunConfig) -> Result<String, RunnerError> {
    let pipeline = Pipeline::load(config)?;
    let selections = pipeline.selections()?;
    Ok(selection_jsonl(&selections))
}

/// `build-prompts`: every prompt bundle as JSONL `{id, group, text}`.
pub fn build_prompts_dump(config: &RunConfig) -> Result<String, RunnerError> {
    #[derive(Serialize)]
    struct BundleLine<'a> {
        id: &'a str,
        group: usize,
        text: &'a str,
    }
    let pipeline = Pipeline::load(config)?;
    let selections = pipeline.selections()?;
    let entries = pipeline.instances()?.entries;
    let work = pipeline.work_items(&selections, &entries)?;
    let mut out = String::new();
    for item in &work {
        out.push_str(
            &serde_json::to_string(&BundleLine {
                id: &item.bundle.test_instance_id,
                group: item.bundle.group_index,
                text: &item.bundle.text,
            })
            .expect("bundle serializes"),
        );
        out.push('\n');
    }
    Ok(out)
}

/// Cross-dataset transfer: shots and candidates come from
/// `config.shot_dataset_dir`, evaluation runs on `config.dataset_dir`'s test
/// split. With equal datasets this reduces to a plain `run`.
pub fn transfer(config: &RunConfig) -> Result<RunArtifacts, RunnerError> {
    if config.shot_dataset_dir.is_none() {
        return Err(RunnerError::Config(
            "transfer requires a shot dataset directory".into(),
        ));
    }
    run(config)
}

#[derive(Debug)]
pub struct SweepArtifacts {
    pub result: SweepResult,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
}

/// Runs the pipeline once per shot count in `ns` (cache shared across runs),
/// fits a quadratic to the (n, F1) points, and writes `sweep.csv` plus
/// `sweep.svg` under the configured output directory.
pub fn sweep(config: &RunConfig, ns: &[usize]) -> Result<SweepArtifacts, RunnerError> {
    if ns.is_empty() {
        return Err(RunnerError::Config("sweep range is empty".into()));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut sub = config.clone();
        sub.shots = n;
        sub.out_dir = config.out_dir.join("sweep").join(format!("n{n:02}"));
        let artifacts = run(&sub)?;
        points.push(SweepPoint {
            n_shots: n,
            p: artifacts.report.p,
            r: artifacts.report.r,
            f1: artifacts.report.f1,
        });
    }
    let fit = quad_fit(
        &points
            .iter()
            .map(|p| (p.n_shots as f64, p.f1))
            .collect::<Vec<_>>(),
    );
    let result = SweepResult { points, fit };

    fs::create_dir_all(&config.out_dir)?;
    let csv_path = config.out_dir.join("sweep.csv");
    fs::write(&csv_path, sweep_csv(&result))?;
    let svg_path = config.out_dir.join("sweep.svg");
    let title = format!(
        "{} {}: F1 by shot count",
        load_dataset_label(config),
        config.task
    );
    fs::write(&svg_path, sweep_svg(&result, &title))?;
    Ok(SweepArtifacts {
        result,
        csv_path,
        svg_path,
    })
}

fn load_dataset_label(config: &RunConfig) -> String {
    config
        .dataset_name
        .clone()
        .unwrap_or_else(|| {
            config
                .dataset_dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("DATASET")
                .to_string()
        })
}

/// Offline re-scoring of a run's audit file against a dataset's gold. The
/// audit must cover exactly the instances the dataset yields for the task.
pub fn rescore(
    dataset: &Dataset,
    task: TaskKind,
    audit_content: &str,
    align: AlignMode,
) -> Result<MetricsReport, RunnerError> {
    let mut per_instance: std::collections::BTreeMap<String, Vec<(usize, String)>> =
        std::collections::BTreeMap::new();
    for (line_no, raw) in audit_content.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: AuditLine = serde_json::from_str(raw).map_err(|e| {
            RunnerError::Config(format!("audit line {}: {e}", line_no + 1))
        })?;
        per_instance
            .entry(line.instance_id.clone())
            .or_default()
            .push((line.group, line.response));
    }

    let mut examples_by_id: HashMap<&str, &Example> = HashMap::new();
    for example in dataset.all_examples() {
        examples_by_id.insert(example.id.as_str(), example);
    }

    let mut predictions = std::collections::BTreeMap::new();
    let mut golds = std::collections::BTreeMap::new();
    for example in &dataset.test {
        for instance in expand_instances(example, task)? {
            match gold_target(example, &instance) {
                Ok(gold) => {
                    golds.insert(instance.instance_id.clone(), gold);
                }
                Err(TaskError::AmbiguousPolarity { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
            let Some(mut responses) = per_instance.remove(&instance.instance_id) else {
                continue;
            };
            responses.sort_by_key(|(group, _)| *group);
            let example = examples_by_id[instance.example_id.as_str()];
            let groups: Vec<NormalizedPrediction> = responses
                .iter()
                .map(|(_, response)| {
                    align_to_sentence(
                        parse_output(response, task, &instance.instance_id),
                        example,
                        align,
                    )
                })
                .collect();
            predictions.insert(instance.instance_id.clone(), union_ensemble(&groups, task)?);
        }
    }
    Ok(score(&predictions, &golds, task)?)
}

/// Records every (instance, group) prompt of a run into the cache-backed
/// replay map form used by the replay client: run once with any client and a
/// cache directory, then export.
pub fn export_replay(cache_dir: &Path, out: &Path) -> Result<(), RunnerError> {
    let cache = ResponseCache::new(cache_dir)?;
    crate::gateway::export_replay_map(&cache, out)?;
    Ok(())
}
