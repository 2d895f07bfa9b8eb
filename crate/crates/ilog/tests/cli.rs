mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::data;
use ilog::cli::{run, QualityLine, RecommendOutput};
use ilog::format::{load_event_log, timeline_lines, ModelFile};
use ilog::zones::TzDatabase;
use ilog_core::context::ParticipantId;
use ilog_core::plan::check_document;
use ilog_core::predictor::{extract_features, recommend_windows, train_eval, ClassifierKind, ClassifierSpec, EvalOptions, Protocol};
use ilog_core::quality::{compliance_heatmap, rank_all, run_quality_checks, CheckConfig, QualityParameters};
use ilog_core::schedule::compile;
use ilog_core::sim::{record_order, LogRecord};
use sha2::{Digest, Sha256};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn ilog(args: &[&str]) -> Out {
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("ilog").chain(args.iter().copied()), &mut stdout, &mut stderr);
    Out { code, stdout: String::from_utf8(stdout).unwrap(), stderr: String::from_utf8(stderr).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ndjson<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| serde_json::to_string(&x).unwrap() + "\n").collect()
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Simulated study log for four participants, plus its ground truth.
fn simulated(dir: &Path) -> (PathBuf, PathBuf) {
    let (log, truth) = (dir.join("study.log"), dir.join("study.truth"));
    let out = ilog(&[
        "simulate",
        p(&data("study.ilogcal")),
        "--participants",
        "4",
        "--seed",
        "7",
        "--out",
        p(&log),
        "--truth",
        p(&truth),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    (log, truth)
}

#[test]
fn validate_is_silent_on_a_clean_plan() {
    let out = ilog(&["validate", p(&golden("daily_wellbeing.ilogcal"))]);
    assert_eq!((out.code, out.stdout.as_str(), out.stderr.as_str()), (0, "", ""));
    let warn = ilog(&["validate", p(&golden("diary_two_phase.ilogcal"))]);
    assert_eq!(warn.code, 0);
    assert_eq!(warn.stderr.lines().count(), 2);
    assert!(warn.stdout.is_empty());
}

#[test]
fn validation_failures_exit_one_with_diagnostics_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ilogcal");
    let text = std::fs::read_to_string(golden("daily_wellbeing.ilogcal")).unwrap().replace("X-QCATEGORY:WI", "X-QCATEGORY:ZZ");
    std::fs::write(&bad, text).unwrap();
    let out = ilog(&["validate", p(&bad)]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.starts_with("error["), "{}", out.stderr);
    let nd = ilog(&["--format", "ndjson", "validate", p(&bad)]);
    let diags = check_document(&std::fs::read_to_string(&bad).unwrap()).diagnostics;
    assert_eq!(nd.stderr, ndjson(&diags));
    let missing = ilog(&["validate", "/nonexistent/plan.ilogcal"]);
    assert_eq!(missing.code, 1);
}

#[test]
fn usage_errors_exit_two() {
    for args in [&[][..], &["bogus"], &["validate"], &["expand", "x", "--no-such-flag"], &["--format", "xml", "validate", "x"]] {
        let out = ilog(args);
        assert_eq!(out.code, 2, "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["validate", "expand", "simulate", "quality", "heatmap", "predict", "recommend", "serve"] {
        let out = ilog(&[sub, "--help"]);
        assert_eq!(out.code, 0, "{sub}");
        assert!(out.stdout.contains("Usage: ilog ") && out.stdout.contains(sub), "{sub}: {}", out.stdout);
    }
    assert_eq!(ilog(&["--help"]).code, 0);
    assert!(ilog(&["--version"]).stdout.starts_with("ilog "));
}

#[test]
fn the_binary_reports_the_same_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ilog");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let ok = status(&["validate", p(&golden("daily_wellbeing.ilogcal"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stdout.is_empty() && ok.stderr.is_empty());
    assert_eq!(status(&["validate", "/nonexistent"]).status.code(), Some(1));
    assert_eq!(status(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(status(&["predict", "--help"]).status.code(), Some(0));
}

#[test]
fn expanding_the_location_sensor_gives_69120_lines() {
    let out = ilog(&["expand", p(&golden("sensors_48d.ilogcal")), "--collection", "Location"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout.lines().count(), 69120);
    assert!(out.stdout.lines().last().unwrap().starts_with("2020-12-19T23:59:00Z"));
    let by_ref = ilog(&["--format", "csv", "expand", p(&golden("sensors_48d.ilogcal")), "--collection", "calendar[7]/context[1]/sensor[1]"]);
    assert_eq!(by_ref.stdout.lines().count(), 69121);
}

#[test]
fn expand_ndjson_is_the_timeline() {
    let path = golden("diary_two_phase.ilogcal");
    let out = ilog(&["--format", "ndjson", "expand", p(&path), "--participant", "a", "--participant", "b"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let plan = check_document(&std::fs::read_to_string(&path).unwrap()).plan;
    let profiles = ["a", "b"].map(|id| ilog_core::context::ParticipantProfile::new(id, "Unknown", "Unknown", "Unknown", "UTC"));
    let timeline = compile(&plan, &profiles).unwrap();
    let lines = timeline_lines(&timeline, &[ParticipantId::new("a"), ParticipantId::new("b")]);
    assert_eq!(out.stdout, ndjson(&lines));
}

#[test]
fn simulate_is_reproducible_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |seed: &str, name: &str| {
        let out_path = dir.path().join(name);
        let out = ilog(&["simulate", p(&data("study.ilogcal")), "--participants", "3", "--seed", seed, "--out", p(&out_path)]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert!(out.stdout.is_empty());
        sha(&out_path)
    };
    let a = run_with("7", "a.log");
    let b = run_with("7", "b.log");
    let c = run_with("8", "c.log");
    assert_eq!(a, b);
    assert_ne!(a, c);
    // Without --out the same bytes go to stdout.
    let to_stdout = ilog(&["simulate", p(&data("study.ilogcal")), "--participants", "3", "--seed", "7"]);
    assert_eq!(hex::encode(Sha256::digest(to_stdout.stdout.as_bytes())), a);
    let file = load_event_log(&dir.path().join("a.log")).unwrap();
    assert_eq!(file.header.participants.len(), 3);
    assert!(file.records.windows(2).all(|w| record_order(&w[0], &w[1]).is_le()));
}

#[test]
fn quality_and_heatmap_ndjson_equal_the_library_output() {
    let dir = tempfile::tempdir().unwrap();
    let (log_path, _) = simulated(dir.path());
    let file = load_event_log(&log_path).unwrap();
    let mut log = file.records.clone();
    log.sort_by(record_order);
    let now = log.iter().map(LogRecord::at).max().unwrap();

    let out = ilog(&["--format", "ndjson", "quality", p(&log_path)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let expected: Vec<QualityLine> = rank_all(&log, &QualityParameters::default(), now)
        .into_iter()
        .map(QualityLine::Ranking)
        .chain(run_quality_checks(&log, None, &CheckConfig::default()).into_iter().map(QualityLine::Flag))
        .collect();
    assert_eq!(out.stdout, ndjson(&expected));

    let plan = check_document(&std::fs::read_to_string(data("study.ilogcal")).unwrap()).plan;
    let timeline = compile(&plan, &file.header.participants).unwrap();
    let with_plan = ilog(&["--format", "ndjson", "quality", p(&log_path), "--plan", p(&data("study.ilogcal"))]);
    let flags = run_quality_checks(&log, Some(&timeline), &CheckConfig::default());
    assert!(with_plan.stdout.ends_with(&ndjson(flags.into_iter().map(QualityLine::Flag))));

    let heat = ilog(&["--format", "ndjson", "heatmap", p(&log_path)]);
    let (from, to) = ("2020-11-02".parse().unwrap(), "2020-11-08".parse().unwrap());
    assert_eq!(heat.stdout, ndjson([compliance_heatmap(&log, from, to)]));
    let csv = ilog(&["heatmap", p(&log_path), "--from", "2020-11-03", "--to", "2020-11-04"]);
    assert_eq!(csv.stdout.lines().next().unwrap(), "participant,2020-11-03,2020-11-04");
    assert_eq!(csv.stdout.lines().count(), 5);
}

#[test]
fn predict_and_recommend_ndjson_equal_the_library_output() {
    let dir = tempfile::tempdir().unwrap();
    let (log_path, _) = simulated(dir.path());
    let file = load_event_log(&log_path).unwrap();
    let mut log = file.records.clone();
    log.sort_by(record_order);
    let rows: Vec<_> =
        file.header.participants.iter().flat_map(|p| extract_features(&log, None, p, &TzDatabase).unwrap()).collect();

    let model_path = dir.path().join("model.json");
    let out = ilog(&[
        "--format",
        "ndjson",
        "predict",
        p(&log_path),
        "--classifier",
        "lr",
        "--seed",
        "3",
        "--set",
        "epochs=50",
        "--save-model",
        p(&model_path),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let spec = ClassifierSpec::new(ClassifierKind::LogisticRegression, 3).with("epochs", 50.0);
    let report = train_eval(&rows, &spec, &Protocol::FiveFoldCv, &EvalOptions::default()).unwrap();
    assert_eq!(out.stdout, ndjson([&report]));

    let split = ilog(&["--format", "ndjson", "predict", p(&log_path), "--classifier", "gnb", "--protocol", "split:p002@2020-11-06T00:00:00Z"]);
    assert_eq!(split.code, 0, "{}", split.stderr);
    let protocol = Protocol::PerParticipantSplit {
        participant: ParticipantId::new("p002"),
        split_at: "2020-11-06T00:00:00Z".parse().unwrap(),
    };
    let report = train_eval(&rows, &ClassifierSpec::new(ClassifierKind::GaussianNaiveBayes, 0), &protocol, &EvalOptions::default()).unwrap();
    assert_eq!(split.stdout, ndjson([&report]));

    let saved = ModelFile::load(&model_path).unwrap();
    let rec = ilog(&["--format", "ndjson", "recommend", p(&log_path), "--participant", "p003", "--model", p(&model_path)]);
    assert_eq!(rec.code, 0, "{}", rec.stderr);
    let expected = RecommendOutput {
        recommendation: recommend_windows(&saved.model, &saved.encoder, &ParticipantId::new("p003"), &rows),
        proposals: vec![],
    };
    assert_eq!(rec.stdout, ndjson([&expected]));
    assert_eq!(expected.recommendation.ranked.len(), 28);
}

#[test]
fn predict_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let (log_path, _) = simulated(dir.path());
    assert_eq!(ilog(&["predict", p(&log_path), "--classifier", "deep-net"]).code, 2);
    let bad_set = ilog(&["predict", p(&log_path), "--set", "depth=3"]);
    assert_eq!(bad_set.code, 1);
    assert!(bad_set.stderr.contains("depth"));
    assert_eq!(ilog(&["predict", p(&log_path), "--protocol", "holdout"]).code, 1);
    assert_eq!(ilog(&["recommend", p(&log_path), "--participant", "nobody"]).code, 1);
}

#[test]
fn correctness_labels_need_the_truth_file() {
    let dir = tempfile::tempdir().unwrap();
    let (log_path, truth) = simulated(dir.path());
    let without = ilog(&["predict", p(&log_path), "--label", "correctness", "--classifier", "gnb"]);
    assert_eq!(without.code, 1, "{}", without.stdout);
    let with = ilog(&["--format", "csv", "predict", p(&log_path), "--label", "correctness", "--classifier", "gnb", "--truth", p(&truth)]);
    assert_eq!(with.code, 0, "{}", with.stderr);
    assert_eq!(with.stdout.lines().count(), 1 + 5 + 1);
}

#[test]
fn recommend_applies_platform_shifts_through_the_policy() {
    let dir = tempfile::tempdir().unwrap();
    let (log_path, _) = simulated(dir.path());
    let out = ilog(&[
        "--format",
        "ndjson",
        "recommend",
        p(&log_path),
        "--participant",
        "p001",
        "--classifier",
        "rf",
        "--set",
        "trees=20",
        "--plan",
        p(&data("study.ilogcal")),
        "--now",
        "2020-11-05T00:00:00Z",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let parsed: RecommendOutput = serde_json::from_str(out.stdout.trim()).unwrap();
    for prop in &parsed.proposals {
        assert!(prop.applied.is_some() != prop.rejected.is_some());
        assert!(prop.revision.issued_at == "2020-11-05T00:00:00Z".parse().unwrap());
    }
}
