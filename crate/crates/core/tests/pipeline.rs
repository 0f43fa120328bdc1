//! End-to-end integration tests over the bundled fixture dataset.

mod common;

use std::collections::HashSet;
use std::fs;

use common::{fixture_candidates, fixture_config, fixture_dataset_dir, load_fixture};

use absa_core::candidates::CandidateStore;
use absa_core::corpus::{from_canonical_jsonl, to_canonical_jsonl, Split};
use absa_core::normalize::parse_output;
use absa_core::prompt::{build_prompt, head_for, render_answer_items, PromptContext};
use absa_core::runner::{self, CandidatePolicy, ClientSpec, RunConfig};
use absa_core::shots::ShotGroup;
use absa_core::task::{expand_instances, gold_target, TaskKind};

#[test]
fn fixture_has_the_frozen_statistics() {
    let dataset = load_fixture();
    let stats = dataset.stats();
    assert_eq!((stats.train.sentences, stats.train.aspects), (30, 34));
    assert_eq!((stats.dev.sentences, stats.dev.aspects), (8, 7));
    assert_eq!((stats.test.sentences, stats.test.aspects), (12, 13));
}

#[test]
fn fixture_round_trips_through_canonical_jsonl() {
    let dataset = load_fixture();
    let text = to_canonical_jsonl(&dataset);
    let back = from_canonical_jsonl(&text).unwrap();
    assert_eq!(back, dataset);
}

#[test]
fn one_shot_aste_bundle_matches_the_golden_file() {
    let dataset = load_fixture();
    let store = CandidateStore::from_str(
        &fs::read_to_string(fixture_candidates(TaskKind::Aste)).unwrap(),
        &dataset,
        TaskKind::Aste,
    )
    .unwrap();
    let pool: std::collections::HashMap<&str, &absa_core::corpus::Example> = dataset
        .train
        .iter()
        .map(|e| (e.id.as_str(), e))
        .collect();
    let context = PromptContext {
        task: TaskKind::Aste,
        pool: &pool,
        candidates: Some(&store),
        select: Default::default(),
        hcs_enabled: true,
    };
    let test_example = &dataset.test[0];
    let instance = expand_instances(test_example, TaskKind::Aste)
        .unwrap()
        .remove(0);
    let group = ShotGroup {
        group_index: 0,
        member_ids: vec!["FIXTURE/train/0".into()],
    };
    let bundle = build_prompt(
        head_for(TaskKind::Aste),
        &group,
        &context,
        test_example,
        &instance,
    )
    .unwrap();
    let golden = fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/aste_1shot.txt"),
    )
    .unwrap();
    assert_eq!(bundle.text, golden, "prompt bytes diverged from the golden file");
}

#[test]
fn parse_render_round_trip_holds_for_every_fixture_gold() {
    let dataset = load_fixture();
    let mut checked = 0usize;
    for example in dataset.all_examples() {
        for task in TaskKind::ALL {
            for instance in expand_instances(example, task).unwrap() {
                let gold = gold_target(example, &instance).unwrap();
                let rendered = render_answer_items(&gold.items, task).join("\n");
                let parsed = parse_output(&rendered, task, &instance.instance_id);
                assert_eq!(
                    parsed.items, gold.items,
                    "round-trip mismatch for {} {task}",
                    instance.instance_id
                );
                assert!(parsed.lines_rejected.is_empty());
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "only {checked} targets checked");
}

#[test]
fn oracle_run_scores_one_hundred_on_every_task() {
    let tmp = tempfile::tempdir().unwrap();
    for task in TaskKind::ALL {
        let config = fixture_config(task, &tmp.path().join(task.label()));
        let artifacts = runner::run(&config).unwrap();
        let report = &artifacts.report;
        assert_eq!(
            (report.p, report.r, report.f1),
            (100.0, 100.0, 100.0),
            "oracle should be perfect on {task}"
        );
        assert!(report.counts.gold > 0);
        assert!(report.diagnostics.ambiguous_instances.is_empty());
        assert!(artifacts.report_json_path.is_file());
        assert!(artifacts.audit_path.is_file());
    }
}

#[test]
fn empty_client_scores_zero_without_aborting() {
    let tmp = tempfile::tempdir().unwrap();
    for task in TaskKind::ALL {
        let mut config = fixture_config(task, &tmp.path().join(task.label()));
        config.client = ClientSpec::Empty;
        let artifacts = runner::run(&config).unwrap();
        let report = &artifacts.report;
        assert_eq!((report.p, report.r, report.f1), (0.0, 0.0, 0.0));
        assert_eq!(report.counts.predicted, 0);
        assert!(report.counts.gold > 0);
    }
}

#[test]
fn replay_runs_are_byte_identical_with_a_warm_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cache_dir = tmp.path().join("cache");
    let map_path = tmp.path().join("replay.jsonl");

    // Record with the oracle client, then export the replay map.
    let mut record = fixture_config(TaskKind::Aste, &tmp.path().join("record"));
    record.cache_dir = Some(cache_dir.clone());
    runner::run(&record).unwrap();
    runner::export_replay(&cache_dir, &map_path).unwrap();

    let replay_cache = tmp.path().join("replay-cache");
    let run_with = |out: &str| {
        let mut config = fixture_config(TaskKind::Aste, &tmp.path().join(out));
        config.client = ClientSpec::Replay {
            map_path: map_path.clone(),
        };
        config.cache_dir = Some(replay_cache.clone());
        runner::run(&config).unwrap()
    };
    let warmup = run_with("warmup");
    assert_eq!(warmup.report.f1, 100.0, "replayed oracle answers stay perfect");
    let a = run_with("a");
    let b = run_with("b");
    assert_eq!(a.client_calls, 0, "warm cache must avoid client calls");
    assert_eq!(b.client_calls, 0);
    for file in ["report.json", "report.csv", "audit.jsonl", "shots.jsonl"] {
        let left = fs::read(tmp.path().join("a").join(file)).unwrap();
        let right = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical runs");
    }
}

#[test]
fn disabling_hints_changes_prompts_but_not_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let mut with_hints = fixture_config(TaskKind::Aste, &tmp.path().join("hcs"));
    with_hints.client = ClientSpec::Empty;
    let mut without_hints = with_hints.clone();
    without_hints.out_dir = tmp.path().join("nohcs");
    without_hints.hcs = false;

    let a = runner::run(&with_hints).unwrap();
    let b = runner::run(&without_hints).unwrap();

    let audit_with = fs::read_to_string(&a.audit_path).unwrap();
    let audit_without = fs::read_to_string(&b.audit_path).unwrap();
    assert!(audit_with.contains("candidates:"));
    assert!(!audit_without.contains("candidates:"));

    let shots_with = fs::read(&a.shots_path).unwrap();
    let shots_without = fs::read(&b.shots_path).unwrap();
    assert_eq!(shots_with, shots_without, "selection must ignore the hcs flag");
}

#[test]
fn prompt_rendering_is_injective_over_the_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = HashSet::new();
    let mut total = 0usize;
    for task in TaskKind::ALL {
        for hcs in [true, false] {
            let mut config = fixture_config(task, &tmp.path().join("out"));
            config.client = ClientSpec::Empty;
            config.shots = 3;
            config.ensemble = 2;
            config.hcs = hcs;
            let dump = runner::build_prompts_dump(&config).unwrap();
            for line in dump.lines() {
                let value: serde_json::Value = serde_json::from_str(line).unwrap();
                let text = value["text"].as_str().unwrap().to_string();
                assert!(
                    seen.insert(text),
                    "duplicate prompt bytes for {} group {} (task {task}, hcs {hcs})",
                    value["id"],
                    value["group"]
                );
                total += 1;
            }
        }
    }
    // 13 ALSC + 12 AOPE + 12 ASTE instances, 2 groups, hcs on/off
    assert_eq!(total, (13 + 12 + 12) * 2 * 2);
}

#[test]
fn self_transfer_reduces_to_a_plain_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut plain = fixture_config(TaskKind::Aste, &tmp.path().join("plain"));
    plain.client = ClientSpec::Empty;
    let mut transfer = plain.clone();
    transfer.out_dir = tmp.path().join("transfer");
    transfer.shot_dataset_dir = Some(fixture_dataset_dir());
    transfer.shot_dataset_name = Some("FIXTURE".into());

    let a = runner::run(&plain).unwrap();
    let b = runner::transfer(&transfer).unwrap();
    assert_eq!(a.report, b.report);
    assert!(b.report.candidates_dataset.is_none(), "same-name transfer is unlabeled");
}

#[test]
fn cross_dataset_transfer_with_oracle_is_still_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    // A second dataset with its own name; shots still come from FIXTURE.
    let other_dir = tmp.path().join("OTHER");
    fs::create_dir_all(&other_dir).unwrap();
    fs::write(
        other_dir.join("test.txt"),
        "the desk fan is quiet .####[([1, 2], [4], 'POS')]\nterrible oven .####[([1], [0], 'NEG')]\n",
    )
    .unwrap();

    let mut config = RunConfig::new(&other_dir, TaskKind::Aste);
    config.dataset_name = Some("OTHER".into());
    config.shot_dataset_dir = Some(fixture_dataset_dir());
    config.shot_dataset_name = Some("FIXTURE".into());
    config.shots = 2;
    config.client = ClientSpec::Oracle;
    config.out_dir = tmp.path().join("out");
    let artifacts = runner::transfer(&config).unwrap();
    assert_eq!(artifacts.report.f1, 100.0);
    assert_eq!(artifacts.report.candidates_dataset.as_deref(), Some("FIXTURE"));
    assert_eq!(artifacts.report.test_dataset.as_deref(), Some("OTHER"));
}

#[test]
fn transfer_with_missing_candidates_and_fail_policy_aborts() {
    let tmp = tempfile::tempdir().unwrap();
    let other_dir = tmp.path().join("OTHER");
    fs::create_dir_all(&other_dir).unwrap();
    fs::write(
        other_dir.join("test.txt"),
        "the desk fan is quiet .####[([1, 2], [4], 'POS')]\n",
    )
    .unwrap();

    let mut config = RunConfig::new(&other_dir, TaskKind::Aste);
    config.dataset_name = Some("OTHER".into());
    config.shot_dataset_dir = Some(fixture_dataset_dir());
    config.shot_dataset_name = Some("FIXTURE".into());
    config.shots = 1;
    config.client = ClientSpec::Oracle;
    config.candidate_paths = vec![fixture_candidates(TaskKind::Aste)];
    config.candidate_policy = CandidatePolicy::Fail;
    config.out_dir = tmp.path().join("out");
    let err = runner::transfer(&config).unwrap_err();
    assert!(
        err.to_string().contains("no candidate record"),
        "unexpected error: {err}"
    );
}

#[test]
fn rescore_matches_the_original_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(TaskKind::Aope, tmp.path());
    let artifacts = runner::run(&config).unwrap();
    let audit = fs::read_to_string(&artifacts.audit_path).unwrap();
    let dataset = load_fixture();
    let rescored = runner::rescore(&dataset, TaskKind::Aope, &audit, config.align).unwrap();
    assert_eq!(rescored.counts, artifacts.report.counts);
    assert_eq!(rescored.f1, artifacts.report.f1);
}

#[test]
fn ensemble_groups_disagree_then_union_preserves_diversity() {
    // T=2 with the oracle still scores 100 (union of identical answers), and
    // the audit shows two prompts per instance.
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture_config(TaskKind::Aste, tmp.path());
    config.ensemble = 2;
    config.shots = 2;
    let artifacts = runner::run(&config).unwrap();
    assert_eq!(artifacts.report.f1, 100.0);
    let audit = fs::read_to_string(&artifacts.audit_path).unwrap();
    let lines = audit.lines().count();
    assert_eq!(lines, 12 * 2, "one audit line per (instance, group)");
}

#[test]
fn zero_shot_runs_work() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture_config(TaskKind::Aste, tmp.path());
    config.shots = 0;
    let artifacts = runner::run(&config).unwrap();
    assert_eq!(artifacts.report.f1, 100.0, "oracle is shot-independent");
    let audit = fs::read_to_string(&artifacts.audit_path).unwrap();
    assert!(!audit.contains("EXAMPLE #"));
}

#[test]
fn mams_style_data_rejects_extraction_tasks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("mams");
    fs::create_dir_all(&dir).unwrap();
    let xml = r#"<sentences>
  <sentence><text>The staff was rude</text>
    <aspectTerms><aspectTerm term="staff" polarity="negative" from="4" to="9"/></aspectTerms>
  </sentence>
  <sentence><text>Great pasta here</text>
    <aspectTerms><aspectTerm term="pasta" polarity="positive" from="6" to="11"/></aspectTerms>
  </sentence>
</sentences>"#;
    fs::write(dir.join("train.xml"), xml).unwrap();
    fs::write(dir.join("test.xml"), xml).unwrap();

    let mut config = RunConfig::new(&dir, TaskKind::Aope);
    config.client = ClientSpec::Oracle;
    config.out_dir = tmp.path().join("out");
    let err = runner::run(&config).unwrap_err();
    assert!(matches!(err, runner::RunnerError::Unsupported { .. }), "{err}");

    // ALSC works on the same data.
    let mut config = RunConfig::new(&dir, TaskKind::Alsc);
    config.client = ClientSpec::Oracle;
    config.out_dir = tmp.path().join("out2");
    let artifacts = runner::run(&config).unwrap();
    assert_eq!(artifacts.report.f1, 100.0);
    assert_eq!(artifacts.report.dataset, "MAMS");
}

#[test]
fn ambiguous_alsc_gold_is_excluded_and_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("amb");
    fs::create_dir_all(&dir).unwrap();
    // "food" carries POS and NEG gold polarities in one sentence.
    fs::write(
        dir.join("train.txt"),
        "nice place .####[([1], [0], 'POS')]\n",
    )
    .unwrap();
    fs::write(
        dir.join("test.txt"),
        "food was great but expensive .####[([0], [2], 'POS'), ([0], [4], 'NEG')]\nfine screen .####[([1], [0], 'POS')]\n",
    )
    .unwrap();

    let mut config = RunConfig::new(&dir, TaskKind::Alsc);
    config.dataset_name = Some("AMB".into());
    config.shots = 1;
    config.client = ClientSpec::Oracle;
    config.out_dir = tmp.path().join("out");
    let artifacts = runner::run(&config).unwrap();
    assert_eq!(
        artifacts.report.diagnostics.ambiguous_instances,
        vec!["AMB/test/0#a0".to_string()]
    );
    // the unambiguous instance still scores
    assert_eq!(artifacts.report.counts.gold, 1);
    assert_eq!(artifacts.report.f1, 100.0);
}

#[test]
fn candidate_coverage_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(TaskKind::Aste, tmp.path());
    let artifacts = runner::run(&config).unwrap();
    let coverage = artifacts.report.diagnostics.candidate_coverage.unwrap();
    assert_eq!(coverage.train, 1.0, "all fixture train examples carry candidates");
    // two of twelve test examples deliberately lack a record
    assert!((coverage.test - 10.0 / 12.0).abs() < 1e-12);
}

#[test]
fn alsc_query_string_collisions_are_flagged_not_dropped() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("coll");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("train.txt"), "nice place .####[([1], [0], 'POS')]\n").unwrap();
    // "screen" appears as two distinct aspect spans with different gold.
    fs::write(
        dir.join("test.txt"),
        "good screen bad screen .####[([1], [0], 'POS'), ([3], [2], 'NEG')]\n",
    )
    .unwrap();

    let mut config = RunConfig::new(&dir, TaskKind::Alsc);
    config.dataset_name = Some("COLL".into());
    config.shots = 1;
    config.client = ClientSpec::Oracle;
    config.out_dir = tmp.path().join("out");
    let artifacts = runner::run(&config).unwrap();
    assert_eq!(
        artifacts.report.diagnostics.string_collision_instances,
        vec!["COLL/test/0#a0".to_string(), "COLL/test/0#a1".to_string()]
    );
    // both instances are still queried and scored
    assert_eq!(artifacts.report.counts.gold, 2);
}

#[test]
fn ambiguous_alsc_shot_falls_back_to_a_clean_aspect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ambshot");
    fs::create_dir_all(&dir).unwrap();
    // First aspect ("food") carries conflicting gold; "wine" is clean.
    fs::write(
        dir.join("train.txt"),
        "food was great but expensive and the wine was fine .####[([0], [2], 'POS'), ([0], [4], 'NEG'), ([7], [9], 'POS')]\n",
    )
    .unwrap();
    fs::write(dir.join("test.txt"), "fine screen .####[([1], [0], 'POS')]\n").unwrap();

    let mut config = RunConfig::new(&dir, TaskKind::Alsc);
    config.dataset_name = Some("AMBSHOT".into());
    config.shots = 1;
    config.client = ClientSpec::Empty;
    config.out_dir = tmp.path().join("out");
    let dump = runner::build_prompts_dump(&config).unwrap();
    assert!(dump.contains("aspect: wine"), "shot should demonstrate the clean aspect: {dump}");
    assert!(runner::run(&config).is_ok(), "ambiguous shot gold must not abort the run");
}

#[test]
fn strict_span_alignment_drops_hallucinated_terms() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let map = tmp.path().join("map.jsonl");

    // Record one ASTE run, then doctor the replay map so every response
    // hallucinates an extra off-sentence triplet.
    let mut record = fixture_config(TaskKind::Aste, &tmp.path().join("record"));
    record.shots = 1;
    record.cache_dir = Some(cache.clone());
    runner::run(&record).unwrap();
    runner::export_replay(&cache, &map).unwrap();
    let doctored: String = fs::read_to_string(&map)
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            let response = v["response"].as_str().unwrap().to_string();
            v["response"] =
                serde_json::Value::String(format!("{response}\n(warp drive, broken, negative)"));
            serde_json::to_string(&v).unwrap()
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&map, doctored).unwrap();

    let mut flagged = fixture_config(TaskKind::Aste, &tmp.path().join("flagged"));
    flagged.shots = 1;
    flagged.client = ClientSpec::Replay { map_path: map.clone() };
    let kept = runner::run(&flagged).unwrap();
    assert!(kept.report.p < 100.0, "hallucinations must hurt precision in string mode");
    assert!(kept.report.diagnostics.flagged_item_count > 0);

    let mut strict = fixture_config(TaskKind::Aste, &tmp.path().join("strict"));
    strict.shots = 1;
    strict.client = ClientSpec::Replay { map_path: map };
    strict.align = absa_core::normalize::AlignMode::StrictSpan;
    let dropped = runner::run(&strict).unwrap();
    assert_eq!(dropped.report.f1, 100.0, "strict-span drops the hallucination");
}

#[test]
fn two_point_sweep_emits_csv_but_skips_the_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(TaskKind::Aste, tmp.path());
    let artifacts = runner::sweep(&config, &[1, 2]).unwrap();
    assert!(artifacts.result.fit.is_none());
    let csv = fs::read_to_string(&artifacts.csv_path).unwrap();
    assert_eq!(csv.lines().count(), 3, "header plus two data rows");
    assert!(artifacts.svg_path.is_file());
}

#[test]
fn task_invariants_hold_across_the_whole_fixture() {
    let dataset = load_fixture();
    for example in dataset.all_examples() {
        // one ALSC instance per distinct gold aspect span
        let alsc = expand_instances(example, TaskKind::Alsc).unwrap();
        assert_eq!(alsc.len(), example.distinct_aspect_spans().len());

        // dropping polarity from the ASTE gold yields exactly the AOPE gold
        let aste = gold_target(example, &expand_instances(example, TaskKind::Aste).unwrap()[0])
            .unwrap();
        let aope = gold_target(example, &expand_instances(example, TaskKind::Aope).unwrap()[0])
            .unwrap();
        let projected: std::collections::BTreeSet<_> = aste
            .items
            .iter()
            .map(|item| match item {
                absa_core::task::AnswerItem::Triple { aspect, opinion, .. } => {
                    absa_core::task::AnswerItem::Pair {
                        aspect: aspect.clone(),
                        opinion: opinion.clone(),
                    }
                }
                other => other.clone(),
            })
            .collect();
        assert_eq!(projected, aope.items, "projection mismatch in {}", example.id);
    }
}

#[test]
fn canonical_ingest_dir_loads_like_the_source() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = load_fixture();
    // write canonical per-split files
    let dir = tmp.path().join("canon");
    fs::create_dir_all(&dir).unwrap();
    for split in Split::ALL {
        let mut single = absa_core::corpus::Dataset::new(dataset.name.clone());
        *single.split_mut(split) = dataset.split(split).to_vec();
        fs::write(
            dir.join(format!("{}.jsonl", split.label())),
            to_canonical_jsonl(&single),
        )
        .unwrap();
    }
    let reloaded = runner::load_dataset_dir(&dir, None).unwrap();
    assert_eq!(reloaded, dataset);
}
