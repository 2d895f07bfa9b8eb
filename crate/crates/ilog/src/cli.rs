//! The `ilog` command line. Every subcommand loads its inputs, calls one
//! library operation and prints the result; data goes to stdout and
//! diagnostics to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ilog_core::context::{LifeSequence, ParticipantId, ParticipantProfile};
use ilog_core::plan::{check_document, CheckedDocument, Severity};
use ilog_core::predictor::{
    apply_recommendation, extract_features, recommend_windows, train, train_eval, ClassifierKind, ClassifierSpec, Encoder,
    EncoderOptions, EvalOptions, EvalReport, FeatureVector, LabelKind, Protocol, WindowRecommendation,
};
use ilog_core::quality::{rank_all, run_quality_checks, CheckConfig, Heatmap, ParticipantRanking, QualityFlag, QualityParameters};
use ilog_core::schedule::{compile, Revision, RevisionPolicy, Timeline};
use ilog_core::sim::{record_order, run_simulation, BehaviorModel, CellParams, GroundTruthSpec, LogRecord, SimConfig};
use ilog_core::time::{Date, DayPeriod, TimeDelta, Timestamp};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::format::{
    load_config, load_event_log, load_profiles, read_ndjson, save_event_log, timeline_lines, write_event_log,
    write_features_csv, write_heatmap_csv, write_json_line, write_timeline_csv, write_timeline_text, EventLogFile,
    LogHeader, ModelFile,
};
use crate::service::{serve, AppState};
use crate::store::FileStore;
use crate::zones::TzDatabase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Ndjson,
}

#[derive(Debug, Parser)]
#[command(name = "ilog", version, about = "Plan, simulate and monitor smartphone data collection experiments")]
struct Cli {
    /// Output format for data written to stdout.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a plan document; prints diagnostics to stderr.
    Validate {
        plan: PathBuf,
    },
    /// Expand a plan into per-participant timelines.
    Expand(ExpandArgs),
    /// Simulate participants answering a plan and write an event log.
    Simulate(SimulateArgs),
    /// Rank participants and list quality flags for an event log.
    Quality(QualityArgs),
    /// Compliance heatmap (participants by days) for an event log.
    Heatmap(HeatmapArgs),
    /// Train and evaluate a classifier on features from an event log.
    Predict(PredictArgs),
    /// Rank (weekday, day period) cells for one participant and optionally
    /// apply the resulting shifts to a plan.
    Recommend(RecommendArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ExpandArgs {
    plan: PathBuf,
    /// Only these participants (repeatable). Without --profiles each one gets a UTC profile.
    #[arg(long)]
    participant: Vec<String>,
    /// Participant profiles (JSON array or CSV).
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Only occurrences of this collection, by reference (calendar[1]/context[1]/sensor[1]) or label.
    #[arg(long)]
    collection: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    plan: PathBuf,
    /// Participant profiles (JSON array or CSV).
    #[arg(long, conflicts_with = "participants")]
    profiles: Option<PathBuf>,
    /// Generate this many participants instead of reading profiles.
    #[arg(long)]
    participants: Option<usize>,
    /// Time zone of generated participants.
    #[arg(long, default_value = "UTC")]
    timezone: String,
    /// Behavior model (JSON or TOML). Defaults to the reference model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ground-truth spec (JSON or TOML). Defaults to the plan's answer vocabularies.
    #[arg(long)]
    ground: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Event log destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the generated ground truth here, one sequence per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    failure_rate: f64,
    #[arg(long, default_value_t = 5)]
    latency_secs: i64,
    /// QA events only.
    #[arg(long)]
    no_sensors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QualitySection {
    Rankings,
    Flags,
}

#[derive(Debug, Args)]
struct QualityArgs {
    log: PathBuf,
    /// Ranking thresholds (JSON or TOML).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Check configuration (JSON or TOML).
    #[arg(long)]
    checks: Option<PathBuf>,
    /// Plan the log was collected under; enables the sensor-gap check.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Ranking instant; defaults to the latest record.
    #[arg(long)]
    now: Option<Timestamp>,
    /// Table printed by --format csv.
    #[arg(long, value_enum, default_value = "rankings")]
    section: QualitySection,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    log: PathBuf,
    /// First day (YYYY-MM-DD); defaults to the first day in the log.
    #[arg(long)]
    from: Option<Date>,
    /// Last day, inclusive; defaults to the last day in the log.
    #[arg(long)]
    to: Option<Date>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabelArg {
    Timeliness,
    Correctness,
}

impl From<LabelArg> for LabelKind {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Timeliness => LabelKind::Timeliness,
            LabelArg::Correctness => LabelKind::Correctness,
        }
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// random-forest (rf), knn, logistic-regression (lr), gaussian-nb (gnb), linear-svm (svm).
    #[arg(long, default_value = "random-forest")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hyperparameter override, e.g. --set trees=50 (repeatable).
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Ground truth written by `simulate --truth`; needed for the correctness label.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Use the mood answer as a feature.
    #[arg(long)]
    include_wi: bool,
    #[arg(long, value_enum, default_value = "timeliness")]
    label: LabelArg,
}

#[derive(Debug, Args)]
struct PredictArgs {
    log: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// `cv` for five-fold cross-validation, `split:<participant>` for the
    /// two-week split, `split:<participant>@<instant>` for an explicit one.
    #[arg(long, default_value = "cv")]
    protocol: String,
    /// Write a model trained on every row here.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Write the feature matrix here as CSV.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    log: PathBuf,
    #[arg(long)]
    participant: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Saved model to use instead of training one.
    #[arg(long = "model")]
    model_file: Option<PathBuf>,
    /// Plan to apply the recommendation to as platform revisions.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Revision policy (JSON or TOML).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Revisions only touch occurrences after this instant; defaults to the latest record.
    #[arg(long)]
    now: Option<Timestamp>,
    #[arg(long, default_value_t = 24)]
    horizon_hours: i64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "ILOG_DATA_DIR")]
    data_dir: PathBuf,
    #[arg(long, env = "ILOG_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    /// Token file (TOML or JSON); defaults to <data-dir>/service.toml.
    #[arg(long, env = "ILOG_CONFIG")]
    config: Option<PathBuf>,
}

/// A failure reported on stderr with exit code 1.
#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Runs one invocation. Returns the exit code: 0 on success, 1 on
/// validation or runtime failure, 2 on a usage error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let fmt = cli.format;
    let mut out = PipeWriter { inner: stdout, closed: false };
    let stdout: &mut dyn Write = &mut out;
    let result = match cli.command {
        Command::Validate { plan } => validate(&plan, fmt, stderr),
        Command::Expand(a) => expand(a, fmt, stdout),
        Command::Simulate(a) => simulate(a, stdout),
        Command::Quality(a) => quality(a, fmt, stdout),
        Command::Heatmap(a) => heatmap(a, fmt, stdout),
        Command::Predict(a) => predict(a, fmt, stdout),
        Command::Recommend(a) => recommend(a, fmt, stdout),
        Command::Serve(a) => serve_cmd(a, stderr),
    };
    let code = match result {
        Ok(code) => code,
        Err(_) if out.closed => 0,
        Err(Failure(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    };
    let _ = out.flush();
    let _ = stderr.flush();
    code
}

/// Remembers whether the reader of stdout went away, so `ilog ... | head`
/// ends quietly.
struct PipeWriter<'a> {
    inner: &'a mut dyn Write,
    closed: bool,
}

impl PipeWriter<'_> {
    fn note<T>(&mut self, r: io::Result<T>) -> io::Result<T> {
        if let Err(e) = &r {
            self.closed |= e.kind() == io::ErrorKind::BrokenPipe;
        }
        r
    }
}

impl Write for PipeWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let r = self.inner.write(buf);
        self.note(r)
    }

    fn flush(&mut self) -> io::Result<()> {
        let r = self.inner.flush();
        self.note(r)
    }
}

fn read_plan(path: &Path) -> Result<CheckedDocument, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    Ok(check_document(&text))
}

fn write_diagnostics(checked: &CheckedDocument, fmt: OutputFormat, stderr: &mut dyn Write) -> io::Result<()> {
    for d in &checked.diagnostics {
        match fmt {
            OutputFormat::Ndjson => write_json_line(stderr, d)?,
            _ => {
                let sev = match d.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                let line = d.line.map(|l| format!("line {l}: ")).unwrap_or_default();
                writeln!(stderr, "{sev}[{:?}] {line}{}: {}", d.code, d.path, d.message)?;
            }
        }
    }
    Ok(())
}

/// Parses a plan, printing diagnostics; fails when it has errors.
fn load_plan(path: &Path, fmt: OutputFormat, stderr: &mut dyn Write) -> Result<CheckedDocument, Failure> {
    let checked = read_plan(path)?;
    if checked.has_errors() {
        write_diagnostics(&checked, fmt, stderr)?;
        return Err(Failure(format!("{} is not a valid plan", path.display())));
    }
    Ok(checked)
}

fn validate(plan: &Path, fmt: OutputFormat, stderr: &mut dyn Write) -> Outcome {
    let checked = read_plan(plan)?;
    write_diagnostics(&checked, fmt, stderr)?;
    Ok(if checked.has_errors() { 1 } else { 0 })
}

fn utc_profiles(ids: impl IntoIterator<Item = String>, timezone: &str) -> Vec<ParticipantProfile> {
    ids.into_iter().map(|id| ParticipantProfile::new(id, "Unknown", "Unknown", "Unknown", timezone)).collect()
}

/// `n` participants `p001`, `p002`, … with demographics dealt round-robin.
pub fn generated_profiles(n: usize, timezone: &str) -> Vec<ParticipantProfile> {
    const GENDERS: [&str; 2] = ["Female", "Male"];
    const DEGREES: [&str; 3] = ["BSc", "MSc", "PhD"];
    const DEPARTMENTS: [&str; 4] = ["Economics", "Engineering", "Humanities", "Sciences"];
    (0..n)
        .map(|i| {
            ParticipantProfile::new(
                format!("p{:03}", i + 1),
                GENDERS[i % GENDERS.len()],
                DEGREES[(i / 2) % DEGREES.len()],
                DEPARTMENTS[(i / 6) % DEPARTMENTS.len()],
                timezone,
            )
        })
        .collect()
}

fn expand(a: ExpandArgs, fmt: OutputFormat, stdout: &mut dyn Write) -> Outcome {
    let checked = load_plan(&a.plan, fmt, &mut io::sink())?;
    let profiles = match &a.profiles {
        Some(path) => load_profiles(path)?,
        None if a.participant.is_empty() => utc_profiles(["p001".to_string()], "UTC"),
        None => utc_profiles(a.participant.clone(), "UTC"),
    };
    let timeline = compile(&checked.plan, &profiles)?;
    let mut ids: Vec<ParticipantId> = profiles.iter().map(|p| p.id.clone()).collect();
    if !a.participant.is_empty() {
        for p in &a.participant {
            if !ids.iter().any(|id| id.as_str() == p) {
                return Err(Failure(format!("participant {p} is not in the profiles")));
            }
        }
        ids.retain(|id| a.participant.iter().any(|p| p == id.as_str()));
    }
    let mut lines = timeline_lines(&timeline, &ids);
    if let Some(wanted) = &a.collection {
        let refs: Vec<_> = timeline
            .collections()
            .iter()
            .filter(|(r, spec)| r.to_string() == *wanted || spec.label.eq_ignore_ascii_case(wanted))
            .map(|(r, _)| *r)
            .collect();
        if refs.is_empty() {
            return Err(Failure(format!("no collection matches {wanted:?}")));
        }
        lines.retain(|l| refs.contains(&l.entry.occurrence.source));
    }
    match fmt {
        OutputFormat::Text => write_timeline_text(stdout, &lines)?,
        OutputFormat::Csv => write_timeline_csv(stdout, &lines)?,
        OutputFormat::Ndjson => {
            for l in &lines {
                write_json_line(stdout, l)?;
            }
        }
    }
    Ok(0)
}

/// Default behavior: the reference model around the default cell.
pub fn default_model(seed: u64) -> BehaviorModel {
    BehaviorModel::reference(CellParams::default(), seed)
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Outcome {
    let checked = load_plan(&a.plan, OutputFormat::Text, &mut io::sink())?;
    let profiles = match (&a.profiles, a.participants) {
        (Some(path), _) => load_profiles(path)?,
        (None, Some(n)) => generated_profiles(n, &a.timezone),
        (None, None) => generated_profiles(1, &a.timezone),
    };
    let timeline = compile(&checked.plan, &profiles)?;
    let (start, end) = checked.plan.window().ok_or_else(|| Failure("plan has no collections".into()))?;
    let mut model = match &a.model {
        Some(path) => load_config::<BehaviorModel>(path)?,
        None => default_model(a.seed),
    };
    model.seed = a.seed;
    let spec = match &a.ground {
        Some(path) => load_config::<GroundTruthSpec>(path)?,
        None => GroundTruthSpec::from_timeline(&timeline),
    };
    spec.check().map_err(Failure::from)?;
    let ground: BTreeMap<ParticipantId, LifeSequence> =
        profiles.iter().map(|p| (p.id.clone(), spec.generate(&p.id, start, end, a.seed))).collect();
    let config = SimConfig {
        delivery_latency: TimeDelta::from_secs(a.latency_secs),
        delivery_failure_rate: a.failure_rate,
        sensors: !a.no_sensors,
    };
    let log = run_simulation(&timeline, &profiles, &ground, &model, &config, &TzDatabase)?;
    let mut header = LogHeader::new(profiles);
    header.start = Some(start);
    header.end = Some(end);
    match &a.out {
        Some(path) => save_event_log(path, &header, &log)?,
        None => write_event_log(stdout, &header, &log)?,
    }
    if let Some(path) = &a.truth {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        for seq in ground.values() {
            write_json_line(&mut w, seq)?;
        }
        w.flush()?;
    }
    Ok(0)
}

/// Records in the order every check and metric expects.
fn sorted(mut records: Vec<LogRecord>) -> Vec<LogRecord> {
    records.sort_by(record_order);
    records
}

fn latest(records: &[LogRecord]) -> Result<Timestamp, Failure> {
    records.iter().map(LogRecord::at).max().ok_or_else(|| Failure("event log is empty".into()))
}

/// One line of `quality --format ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "line", rename_all = "snake_case")]
pub enum QualityLine {
    Ranking(ParticipantRanking),
    Flag(QualityFlag),
}

fn opt_delta(d: Option<TimeDelta>) -> String {
    d.map_or_else(|| "-".to_string(), |d| d.to_string())
}

fn quality(a: QualityArgs, fmt: OutputFormat, stdout: &mut dyn Write) -> Outcome {
    let EventLogFile { header, records } = load_event_log(&a.log)?;
    let log = sorted(records);
    let params = match &a.params {
        Some(path) => load_config::<QualityParameters>(path)?,
        None => QualityParameters::default(),
    };
    params.check().map_err(Failure::from)?;
    let checks = match &a.checks {
        Some(path) => load_config::<CheckConfig>(path)?,
        None => CheckConfig::default(),
    };
    let timeline = match &a.plan {
        Some(path) => Some(compile(&load_plan(path, OutputFormat::Text, &mut io::sink())?.plan, &header.participants)?),
        None => None,
    };
    let now = match a.now {
        Some(t) => t,
        None => latest(&log)?,
    };
    let rankings = rank_all(&log, &params, now);
    let flags = run_quality_checks(&log, timeline.as_ref(), &checks);
    match fmt {
        OutputFormat::Ndjson => {
            for r in rankings {
                write_json_line(stdout, &QualityLine::Ranking(r))?;
            }
            for f in flags {
                write_json_line(stdout, &QualityLine::Flag(f))?;
            }
        }
        OutputFormat::Csv => {
            let mut csv = csv::Writer::from_writer(stdout);
            match a.section {
                QualitySection::Rankings => {
                    csv.write_record(["participant", "verdict", "unanswered", "avg_reaction_ms", "avg_completion_ms", "as_of"])?;
                    for r in &rankings {
                        let ms = |d: Option<TimeDelta>| d.map_or_else(String::new, |d| d.as_millis().to_string());
                        csv.write_record([
                            r.participant.as_str(),
                            &r.verdict.to_string(),
                            &r.unanswered_count.to_string(),
                            &ms(r.avg_reaction),
                            &ms(r.avg_completion),
                            &r.as_of.to_string(),
                        ])?;
                    }
                }
                QualitySection::Flags => {
                    csv.write_record(["participant", "kind", "at", "evidence", "detail"])?;
                    for f in &flags {
                        let evidence: Vec<String> = f.evidence.iter().map(usize::to_string).collect();
                        csv.write_record([
                            f.participant.as_ref().map_or("", |p| p.as_str()),
                            &format!("{:?}", f.kind),
                            &f.at.to_string(),
                            &evidence.join(" "),
                            &f.detail,
                        ])?;
                    }
                }
            }
            csv.flush()?;
        }
        OutputFormat::Text => {
            writeln!(stdout, "rankings as of {now}")?;
            for r in &rankings {
                writeln!(
                    stdout,
                    "  {:<12} {:<7} unanswered {:>5}  reaction {:>10}  completion {:>10}",
                    r.participant.as_str(),
                    r.verdict.to_string(),
                    r.unanswered_count,
                    opt_delta(r.avg_reaction),
                    opt_delta(r.avg_completion)
                )?;
            }
            writeln!(stdout, "flags ({})", flags.len())?;
            for f in &flags {
                let who = f.participant.as_ref().map_or("*", |p| p.as_str());
                writeln!(stdout, "  {}  {:<12} {:?}  {}", f.at, who, f.kind, f.detail)?;
            }
        }
    }
    Ok(0)
}

fn heatmap(a: HeatmapArgs, fmt: OutputFormat, stdout: &mut dyn Write) -> Outcome {
    let EventLogFile { header, records } = load_event_log(&a.log)?;
    let log = sorted(records);
    let span_from = header.start.map(Timestamp::date).or_else(|| log.first().map(|r| r.at().date()));
    let span_to = header
        .end
        .map(|e| (e - TimeDelta::from_millis(1)).date())
        .or_else(|| log.iter().map(LogRecord::at).max().map(Timestamp::date));
    let from = a.from.or(span_from).ok_or_else(|| Failure("empty log; pass --from and --to".into()))?;
    let to = a.to.or(span_to).unwrap_or(from);
    if to < from {
        return Err(Failure(format!("--to {to} is before --from {from}")));
    }
    let map: Heatmap = ilog_core::quality::compliance_heatmap(&log, from, to);
    match fmt {
        OutputFormat::Ndjson => write_json_line(stdout, &map)?,
        _ => write_heatmap_csv(stdout, &map)?,
    }
    Ok(0)
}

fn spec_of(m: &ModelArgs) -> Result<ClassifierSpec, Failure> {
    let mut spec = ClassifierSpec::new(m.classifier, m.seed);
    for kv in &m.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure(format!("--set {kv}: expected NAME=VALUE")))?;
        let v: f64 = v.trim().parse().map_err(|_| Failure(format!("--set {kv}: value is not a number")))?;
        spec = spec.with(k.trim(), v);
    }
    spec.check()?;
    Ok(spec)
}

/// Features of every participant in the log header, in participant order.
fn features_of(header: &LogHeader, log: &[LogRecord], truth: Option<&Path>) -> Result<Vec<FeatureVector>, Failure> {
    let ground: BTreeMap<ParticipantId, LifeSequence> = match truth {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            read_ndjson::<LifeSequence, _>(io::BufReader::new(file))?.into_iter().map(|s| (s.person.clone(), s)).collect()
        }
        None => BTreeMap::new(),
    };
    if header.participants.is_empty() {
        return Err(Failure("event log header lists no participants".into()));
    }
    let mut rows = Vec::new();
    for p in &header.participants {
        rows.extend(extract_features(log, ground.get(&p.id), p, &TzDatabase)?);
    }
    Ok(rows)
}

fn parse_protocol(s: &str, header: &LogHeader, log: &[LogRecord]) -> Result<Protocol, Failure> {
    if s == "cv" {
        return Ok(Protocol::FiveFoldCv);
    }
    let rest = s.strip_prefix("split:").ok_or_else(|| Failure(format!("unknown protocol {s:?}; use cv or split:<participant>")))?;
    match rest.split_once('@') {
        Some((pid, at)) => Ok(Protocol::PerParticipantSplit { participant: ParticipantId::new(pid), split_at: at.parse()? }),
        None => {
            let start = match header.start {
                Some(t) => t,
                None => log.iter().map(LogRecord::at).min().ok_or_else(|| Failure("event log is empty".into()))?,
            };
            Ok(Protocol::two_week_split(ParticipantId::new(rest), start))
        }
    }
}

fn write_report_text(w: &mut dyn Write, r: &EvalReport) -> io::Result<()> {
    let protocol = match &r.protocol {
        Protocol::FiveFoldCv => "five-fold cross-validation".to_string(),
        Protocol::PerParticipantSplit { participant, split_at } => format!("split of {participant} at {split_at}"),
    };
    writeln!(w, "classifier  {} (seed {})", r.classifier, r.seed)?;
    writeln!(w, "protocol    {protocol}")?;
    writeln!(w, "rows        {}", r.rows)?;
    let m = &r.metrics;
    writeln!(
        w,
        "pooled      accuracy {:.4}  kappa {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        m.accuracy, m.kappa, m.precision, m.recall, m.f1
    )?;
    let c = &r.confusion;
    writeln!(w, "confusion   tp {}  fp {}  fn {}  tn {}", c.tp, c.fp, c.fn_, c.tn)?;
    for f in &r.folds {
        writeln!(
            w,
            "fold {}      train {:>6}  test {:>6}  accuracy {:.4}  kappa {:.4}",
            f.fold, f.train_size, f.test_size, f.metrics.accuracy, f.metrics.kappa
        )?;
    }
    Ok(())
}

fn write_report_csv(w: &mut dyn Write, r: &EvalReport) -> Result<(), Failure> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["fold", "train_size", "test_size", "tp", "fp", "fn", "tn", "accuracy", "kappa", "precision", "recall", "f1"])?;
    let rows = r
        .folds
        .iter()
        .map(|f| (f.fold.to_string(), f.train_size.to_string(), f.test_size.to_string(), f.confusion, f.metrics))
        .chain([("pooled".to_string(), String::new(), r.rows.to_string(), r.confusion, r.metrics)]);
    for (fold, train, test, c, m) in rows {
        csv.write_record([
            fold,
            train,
            test,
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            m.accuracy.to_string(),
            m.kappa.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn predict(a: PredictArgs, fmt: OutputFormat, stdout: &mut dyn Write) -> Outcome {
    let EventLogFile { header, records } = load_event_log(&a.log)?;
    let log = sorted(records);
    let spec = spec_of(&a.model)?;
    let rows = features_of(&header, &log, a.model.truth.as_deref())?;
    if let Some(path) = &a.features {
        write_features_csv(std::fs::File::create(path)?, &rows)?;
    }
    let protocol = parse_protocol(&a.protocol, &header, &log)?;
    let options = EvalOptions { encoder: EncoderOptions { include_wi: a.model.include_wi }, label: a.model.label.into() };
    let report = train_eval(&rows, &spec, &protocol, &options)?;
    if let Some(path) = &a.save_model {
        let encoder = Encoder::fit(&rows, options.encoder);
        let model = train(&encoder.dataset(&rows, options.label), &spec)?;
        ModelFile::new(spec.clone(), options.label, encoder, model).save(path)?;
    }
    match fmt {
        OutputFormat::Ndjson => write_json_line(stdout, &report)?,
        OutputFormat::Csv => write_report_csv(stdout, &report)?,
        OutputFormat::Text => write_report_text(stdout, &report)?,
    }
    Ok(0)
}

/// A platform revision proposed by `recommend --plan` and what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalLine {
    pub revision: Revision,
    pub from: (u8, DayPeriod),
    pub to: (u8, DayPeriod),
    pub applied: Option<u64>,
    pub rejected: Option<String>,
}

/// Output of `recommend`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendOutput {
    pub recommendation: WindowRecommendation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub proposals: Vec<ProposalLine>,
}

fn recommend(a: RecommendArgs, fmt: OutputFormat, stdout: &mut dyn Write) -> Outcome {
    let EventLogFile { header, records } = load_event_log(&a.log)?;
    let log = sorted(records);
    let pid = ParticipantId::new(a.participant.clone());
    let profile = header.profile(&pid).ok_or_else(|| Failure(format!("participant {pid} is not in the log header")))?.clone();
    let rows = features_of(&header, &log, a.model.truth.as_deref())?;
    let (encoder, model) = match &a.model_file {
        Some(path) => {
            let m = ModelFile::load(path)?;
            (m.encoder, m.model)
        }
        None => {
            let spec = spec_of(&a.model)?;
            let encoder = Encoder::fit(&rows, EncoderOptions { include_wi: a.model.include_wi });
            let model = train(&encoder.dataset(&rows, a.model.label.into()), &spec)?;
            (encoder, model)
        }
    };
    let recommendation = recommend_windows(&model, &encoder, &pid, &rows);
    let mut proposals = Vec::new();
    if let Some(plan) = &a.plan {
        let mut timeline: Timeline = compile(&load_plan(plan, OutputFormat::Text, &mut io::sink())?.plan, &header.participants)?;
        let policy = match &a.policy {
            Some(path) => load_config::<RevisionPolicy>(path)?,
            None => RevisionPolicy::default(),
        };
        let now = match a.now {
            Some(t) => t,
            None => latest(&log)?,
        };
        let outcomes = apply_recommendation(
            &mut timeline,
            &recommendation,
            &policy,
            &TzDatabase,
            &profile.timezone,
            now,
            TimeDelta::from_hours(a.horizon_hours),
        )?;
        proposals = outcomes
            .into_iter()
            .map(|o| ProposalLine {
                revision: o.revision,
                from: o.from,
                to: o.to,
                applied: o.applied,
                rejected: o.rejected.map(|e| e.to_string()),
            })
            .collect();
    }
    let out = RecommendOutput { recommendation, proposals };
    match fmt {
        OutputFormat::Ndjson => write_json_line(stdout, &out)?,
        OutputFormat::Csv => {
            let mut csv = csv::Writer::from_writer(stdout);
            csv.write_record(["rank", "weekday", "day_period", "probability"])?;
            for (i, c) in out.recommendation.ranked.iter().enumerate() {
                csv.write_record([(i + 1).to_string(), c.weekday.to_string(), c.day_period.as_str().into(), c.probability.to_string()])?;
            }
            csv.flush()?;
        }
        OutputFormat::Text => {
            let r = &out.recommendation;
            writeln!(stdout, "participant {}{}", r.participant, if r.no_preference { "  (no preference)" } else { "" })?;
            for (i, c) in r.ranked.iter().enumerate() {
                writeln!(stdout, "  {:>2}. weekday {}  {:<10} {:.4}", i + 1, c.weekday, c.day_period.as_str(), c.probability)?;
            }
            for p in &out.proposals {
                let status = match (&p.applied, &p.rejected) {
                    (Some(seq), _) => format!("applied as #{seq}"),
                    (None, Some(why)) => format!("rejected: {why}"),
                    (None, None) => "not applied".into(),
                };
                writeln!(
                    stdout,
                    "  shift {:?}: weekday {} {} -> {}  {status}",
                    p.revision.target,
                    p.from.0,
                    p.from.1.as_str(),
                    p.to.1.as_str()
                )?;
            }
        }
    }
    Ok(0)
}

fn serve_cmd(a: ServeArgs, stderr: &mut dyn Write) -> Outcome {
    let config_path = a.config.clone().unwrap_or_else(|| a.data_dir.join("service.toml"));
    let config = ServiceConfig::load(&config_path).map_err(|e| Failure(format!("{}: {e}", config_path.display())))?;
    let store = FileStore::open(&a.data_dir)?;
    let state = Arc::new(AppState::new(Arc::new(store), &config)?);
    let listener = std::net::TcpListener::bind(&a.bind).map_err(|e| Failure(format!("bind {}: {e}", a.bind)))?;
    listener.set_nonblocking(true)?;
    writeln!(stderr, "listening on http://{}", listener.local_addr()?)?;
    stderr.flush()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(0)
}
