//! `absa` command line: dataset ingestion and statistics, shot-selection and
//! prompt audits, pipeline runs, shot-size sweeps, transfer runs, and offline
//! re-scoring of audit files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use absa_core::corpus::{
    parse_aste_v2, parse_mams_atsa, to_canonical_jsonl, Dataset, DatasetName, Split,
};
use absa_core::normalize::AlignMode;
use absa_core::runner::{
    self, load_dataset_dir, resolve_client, CandidatePolicy, FileConfig, RunArtifacts, RunConfig,
    RunReport,
};
use absa_core::task::TaskKind;

#[derive(Parser)]
#[command(name = "absa", version, about = "Few-shot aspect-based sentiment analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw dataset files into canonical JSONL splits.
    Ingest(IngestArgs),
    /// Print per-split sentence and aspect counts.
    Stats(StatsArgs),
    /// Emit the shot-selection audit JSONL for the test split.
    SelectShots(PipelineArgs),
    /// Emit every rendered prompt bundle as JSONL.
    BuildPrompts(PipelineArgs),
    /// Run the full pipeline and score it.
    Run(PipelineArgs),
    /// Run the pipeline for each shot count in a range and fit the curve.
    Sweep(SweepArgs),
    /// Cross-dataset run: shots and candidates from one dataset, evaluation
    /// on another.
    Transfer(TransferArgs),
    /// Re-score an existing audit file offline.
    Score(ScoreArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input format: aste-v2 or mams.
    #[arg(long)]
    format: String,
    /// Dataset name used in example ids (ignored for mams).
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory for {split}.jsonl files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Dataset directory ({train,dev,test}.{txt,xml,jsonl}).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dataset_name: Option<String>,
    /// Print the stats as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

/// Flags shared by every pipeline-shaped subcommand. Values resolve as:
/// built-in defaults, then --config file, then explicit flags.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// TOML config file mirroring these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    dataset_name: Option<String>,
    /// Task: alsc, aope, or aste.
    #[arg(long)]
    task: Option<String>,
    /// Candidate JSONL files (repeatable).
    #[arg(long = "candidates")]
    candidates: Vec<PathBuf>,
    /// Shots per prompt (K).
    #[arg(long)]
    shots: Option<usize>,
    /// Ensemble groups (T).
    #[arg(long)]
    ensemble: Option<usize>,
    /// Disable candidate hint blocks in prompts.
    #[arg(long)]
    no_hcs: bool,
    /// Client: remote, oracle, empty, or replay.
    #[arg(long)]
    client: Option<String>,
    /// Replay map JSONL (required with --client replay).
    #[arg(long)]
    replay_map: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Response cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Alignment mode: string or strict-span.
    #[arg(long)]
    align: Option<String>,
    /// Missing test-candidate policy: omit or fail.
    #[arg(long)]
    candidate_policy: Option<String>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Output directory for reports and audits.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Smallest shot count.
    #[arg(long, default_value_t = 1)]
    from: usize,
    /// Largest shot count.
    #[arg(long, default_value_t = 20)]
    to: usize,
}

#[derive(Args)]
struct TransferArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Dataset directory providing shots and candidates.
    #[arg(long)]
    shot_dataset: PathBuf,
    #[arg(long)]
    shot_dataset_name: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dataset_name: Option<String>,
    #[arg(long)]
    task: String,
    /// audit.jsonl produced by a run.
    #[arg(long)]
    audit: PathBuf,
    #[arg(long, default_value = "string")]
    align: String,
    /// Write the metrics report JSON here instead of stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    // Die quietly on a closed pipe (e.g. `absa run ... | head`) instead of
    // panicking on the first blocked println.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            // machine-readable error report for harnesses
            let report = serde_json::json!({ "error": format!("{err:#}") });
            eprintln!("{report}");
            std::process::exit(1);
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Stats(args) => stats(args),
        Command::SelectShots(args) => {
            let config = build_config(&args)?;
            let body = runner::select_shots_audit(&config)?;
            write_or_print(&config.out_dir, "shots.jsonl", &body)
        }
        Command::BuildPrompts(args) => {
            let config = build_config(&args)?;
            let body = runner::build_prompts_dump(&config)?;
            write_or_print(&config.out_dir, "prompts.jsonl", &body)
        }
        Command::Run(args) => {
            let config = build_config(&args)?;
            let artifacts = runner::run(&config)?;
            print_report(&artifacts);
            Ok(())
        }
        Command::Sweep(args) => {
            let config = build_config(&args.pipeline)?;
            if args.from > args.to {
                bail!("--from must not exceed --to");
            }
            let ns: Vec<usize> = (args.from..=args.to).collect();
            let artifacts = runner::sweep(&config, &ns)?;
            for point in &artifacts.result.points {
                println!(
                    "n={:<3} P={:>6.2} R={:>6.2} F1={:>6.2}",
                    point.n_shots, point.p, point.r, point.f1
                );
            }
            match &artifacts.result.fit {
                Some(fit) => match fit.extremum {
                    Some((x, y)) => println!(
                        "fit: a={:.4} b={:.4} c={:.4}; extremum at n={x:.2}, F1={y:.2}",
                        fit.a, fit.b, fit.c
                    ),
                    None => println!(
                        "fit: a={:.4} b={:.4} c={:.4}; no interior maximum",
                        fit.a, fit.b, fit.c
                    ),
                },
                None => println!("fit skipped (fewer than 3 points)"),
            }
            println!("csv: {}", artifacts.csv_path.display());
            println!("svg: {}", artifacts.svg_path.display());
            Ok(())
        }
        Command::Transfer(args) => {
            let mut config = build_config(&args.pipeline)?;
            config.shot_dataset_dir = Some(args.shot_dataset.clone());
            config.shot_dataset_name = args.shot_dataset_name.clone();
            let artifacts = runner::transfer(&config)?;
            print_report(&artifacts);
            Ok(())
        }
        Command::Score(args) => rescore(args),
    }
}

fn build_config(args: &PipelineArgs) -> Result<RunConfig> {
    // defaults, then config file, then flags
    let mut config = RunConfig::new(PathBuf::from("."), TaskKind::Aste);
    if let Some(path) = &args.config {
        let file = FileConfig::load(path)?;
        file.apply(&mut config)?;
    }
    if let Some(dataset) = &args.dataset {
        config.dataset_dir = dataset.clone();
    }
    if let Some(name) = &args.dataset_name {
        config.dataset_name = Some(name.clone());
    }
    if let Some(task) = &args.task {
        config.task = task.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    }
    if !args.candidates.is_empty() {
        config.candidate_paths = args.candidates.clone();
    }
    if let Some(shots) = args.shots {
        config.shots = shots;
    }
    if let Some(ensemble) = args.ensemble {
        config.ensemble = ensemble;
    }
    if args.no_hcs {
        config.hcs = false;
    }
    if let Some(client) = &args.client {
        config.client = resolve_client(client, args.replay_map.as_deref())?;
    }
    if let Some(model) = &args.model {
        config.model = model.clone();
    }
    if let Some(endpoint) = &args.endpoint {
        config.endpoint = Some(endpoint.clone());
    }
    if let Some(max_tokens) = args.max_tokens {
        config.max_tokens = max_tokens;
    }
    if let Some(temperature) = args.temperature {
        config.temperature = temperature;
    }
    if let Some(cache) = &args.cache {
        config.cache_dir = Some(cache.clone());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(align) = &args.align {
        config.align = align.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    }
    if let Some(policy) = &args.candidate_policy {
        config.candidate_policy = policy
            .parse::<CandidatePolicy>()
            .map_err(|e| anyhow::anyhow!(e))?;
    }
    if let Some(max_in_flight) = args.max_in_flight {
        config.max_in_flight = max_in_flight;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn print_report(artifacts: &RunArtifacts) {
    let r: &RunReport = &artifacts.report;
    println!(
        "{} {} on {}: P={:.2} R={:.2} F1={:.2} (tp={}, predicted={}, gold={})",
        r.client, r.task, r.dataset, r.p, r.r, r.f1, r.counts.tp, r.counts.predicted, r.counts.gold
    );
    if !r.diagnostics.ambiguous_instances.is_empty() {
        println!(
            "note: {} ALSC instance(s) excluded for ambiguous gold polarity",
            r.diagnostics.ambiguous_instances.len()
        );
    }
    println!("report: {}", artifacts.report_json_path.display());
    println!("audit:  {}", artifacts.audit_path.display());
}

fn write_or_print(out_dir: &Path, file: &str, body: &str) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let path = out_dir.join(file);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let splits = [
        (Split::Train, &args.train),
        (Split::Dev, &args.dev),
        (Split::Test, &args.test),
    ];
    if splits.iter().all(|(_, p)| p.is_none()) {
        bail!("ingest needs at least one of --train/--dev/--test");
    }
    fs::create_dir_all(&args.out)?;
    for (split, path) in splits {
        let Some(path) = path else { continue };
        let content =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (name, examples) = match args.format.as_str() {
            "aste-v2" => {
                let name = DatasetName::parse(args.name.as_deref().unwrap_or("DATASET"));
                let examples = parse_aste_v2(&content, &name, split)?;
                (name, examples)
            }
            "mams" => (DatasetName::Mams, parse_mams_atsa(&content, split)?),
            other => bail!("unknown format {other:?} (expected aste-v2 or mams)"),
        };
        let mut single = Dataset::new(name);
        *single.split_mut(split) = examples;
        let out_path = args.out.join(format!("{}.jsonl", split.label()));
        fs::write(&out_path, to_canonical_jsonl(&single))?;
        println!(
            "wrote {} ({} examples)",
            out_path.display(),
            single.split(split).len()
        );
    }
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let dataset = load_dataset_dir(&args.dataset, args.dataset_name.as_deref())?;
    let stats = dataset.stats();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
        return Ok(());
    }
    println!("dataset: {}", stats.dataset);
    println!("{:<8} {:>10} {:>10}", "split", "sentences", "aspects");
    for split in Split::ALL {
        let s = stats.for_split(split);
        println!("{:<8} {:>10} {:>10}", split.label(), s.sentences, s.aspects);
    }
    Ok(())
}

fn rescore(args: ScoreArgs) -> Result<()> {
    let dataset = load_dataset_dir(&args.dataset, args.dataset_name.as_deref())?;
    let task: TaskKind = args.task.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let align: AlignMode = args.align.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let audit = fs::read_to_string(&args.audit)
        .with_context(|| format!("reading {}", args.audit.display()))?;
    let report = runner::rescore(&dataset, task, &audit, align)?;
    println!(
        "{} on {}: P={:.2} R={:.2} F1={:.2} (tp={}, predicted={}, gold={})",
        report.task,
        dataset.name,
        report.p,
        report.r,
        report.f1,
        report.counts.tp,
        report.counts.predicted,
        report.counts.gold
    );
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(out, format!("{}\n", serde_json::to_string_pretty(&report)?))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
