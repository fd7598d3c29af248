//! Command-line front end for the `tooltraj` binary.
//!
//! Exit codes: 0 success, 1 malformed input lines, 2 missing or unwritable
//! files and usage errors, 3 configuration errors. Files named with
//! `--output` are written to a temporary sibling and renamed into place, so
//! a failed command never leaves a partial file behind.
//!
//! `TOOLTRAJ_LOG=quiet` suppresses informational messages on stderr.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::grpo::PolicySnapshot;
use crate::metrics::{diff_to_csv, transition_diff, TiuReport, TransitionTable, UsageRecord};
use crate::reward::{RewardEngine, RewardError};
use crate::simenv;
use crate::transcript::{answer_matches, extract_answer, CorpusRecord, ToolRegistry, Transcript};

#[derive(Debug, Parser)]
#[command(name = "tooltraj", version, about = "Score, analyze and train tool-using agent rollouts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attach a reward breakdown to every record of a JSONL corpus.
    Score {
        /// JSONL corpus: sample_id, dataset, ground_truth, raw.
        #[arg(long)]
        input: PathBuf,
        /// Reward configuration (TOML); stock weights when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scored JSONL; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// TER / TTAC / TSS / TIU table per group of a scored corpus.
    MetricsTiu {
        /// Scored (or unscored) JSONL corpus.
        #[arg(long)]
        input: PathBuf,
        /// Record field to group rows by.
        #[arg(long, default_value = "dataset")]
        group_by: String,
        /// Configuration supplying the tool registry.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Differential state-transition counts between two corpora, as CSV.
    MetricsTransitions {
        /// Baseline corpus, then treatment corpus (`--input a --input b`).
        #[arg(long, required = true, num_args = 1..=2, action = clap::ArgAction::Append)]
        input: Vec<PathBuf>,
        /// Minimum |delta| for a row to be listed.
        #[arg(long, default_value_t = 5)]
        cutoff: u64,
        /// Configuration supplying the tool registry.
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV path; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the cold-start training loop in the simulated environment.
    Train {
        /// Run configuration (TOML); stock defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Per-iteration JSONL log.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Final policy; defaults to `<output>.policy.json` when `--output` is set.
        #[arg(long)]
        policy_output: Option<PathBuf>,
    },
    /// Sample a corpus of rollouts from a policy in the simulated environment.
    GenCorpus {
        /// Run configuration (TOML); stock defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Policy file written by `train`; the untrained policy when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Number of records, at least 1.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Corpus path; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Echo the effective configuration and check it.
    ValidateConfig {
        /// Configuration to check; stock defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{} does not exist", .0.display())]
    MissingFile(PathBuf),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} malformed line(s)")]
    Malformed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Malformed(_) => 1,
            CliError::MissingFile(_) | CliError::Io { .. } => 2,
            CliError::Config(ConfigError::Io { .. }) => 2,
            CliError::Config(_) => 3,
        }
    }
}

fn info(msg: impl AsRef<str>) {
    if std::env::var("TOOLTRAJ_LOG").map_or(true, |v| v != "quiet") {
        eprintln!("{}", msg.as_ref());
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_owned()));
    }
    std::fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))
}

/// Writes `bytes` to `path` atomically, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(io_err("writing stdout"))
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let context = format!("writing {}", path.display());
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(context.clone()))?;
            tmp.write_all(bytes).map_err(io_err(context.clone()))?;
            tmp.persist(path).map_err(|e| CliError::Io {
                context,
                source: e.error,
            })?;
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) if !p.exists() => return Err(CliError::MissingFile(p.to_owned())),
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn reward_engine(cfg: &RunConfig) -> Result<RewardEngine, CliError> {
    RewardEngine::new(cfg.reward.clone(), cfg.registry()).map_err(|e| {
        let fields = match e {
            RewardError::Invalid(f) => f,
            RewardError::ZeroNormalization => {
                vec![crate::config::FieldError::new("n_norm", "normalization factor is zero")]
            }
        };
        CliError::Config(ConfigError::Invalid(fields))
    })
}

fn record_from_object(obj: &Map<String, Value>) -> Result<CorpusRecord, String> {
    let field = |name: &str| -> Result<String, String> {
        obj.get(name)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| format!("missing string field `{name}`"))
    };
    Ok(CorpusRecord {
        sample_id: field("sample_id")?,
        dataset: field("dataset")?,
        ground_truth: field("ground_truth")?,
        raw: field("raw")?,
    })
}

/// Non-blank lines of a JSONL file as (1-based line number, parsed object).
fn jsonl_objects(text: &str) -> impl Iterator<Item = (usize, Result<Map<String, Value>, String>)> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let parsed = match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(m)) => Ok(m),
                Ok(_) => Err("line is not a JSON object".to_string()),
                Err(e) => Err(format!("invalid JSON: {e}")),
            };
            (i + 1, parsed)
        })
}

/// Scores every line; returns the output text and the malformed-line count.
pub fn score_corpus(text: &str, engine: &RewardEngine) -> (String, usize) {
    let mut out = String::new();
    let mut malformed = 0;
    let mut seen = HashSet::new();
    for (line, parsed) in jsonl_objects(text) {
        let result = parsed.and_then(|obj| {
            let record = record_from_object(&obj)?;
            if !seen.insert(record.sample_id.clone()) {
                return Err(format!("duplicate sample_id `{}`", record.sample_id));
            }
            Ok((obj, record))
        });
        let value = match result {
            Ok((mut obj, record)) => {
                let t = Transcript::from_record(&record, engine.registry());
                let breakdown = engine.score(&t);
                obj.insert(
                    "reward".into(),
                    serde_json::to_value(breakdown).expect("breakdown serializes"),
                );
                Value::Object(obj)
            }
            Err(error) => {
                malformed += 1;
                serde_json::json!({ "line": line, "error": error })
            }
        };
        out.push_str(&value.to_string());
        out.push('\n');
    }
    (out, malformed)
}

/// Parsed transcript plus task outcome; prefers a recorded `reward.r_corr`.
struct Evaluated {
    transcript: Transcript,
    correct: bool,
    object: Map<String, Value>,
}

fn load_evaluated(path: &Path, registry: &ToolRegistry) -> Result<(Vec<Evaluated>, usize), CliError> {
    let text = read_input(path)?;
    let mut out = Vec::new();
    let mut malformed = 0;
    for (line, parsed) in jsonl_objects(&text) {
        match parsed.and_then(|obj| record_from_object(&obj).map(|r| (obj, r))) {
            Ok((object, record)) => {
                let transcript = Transcript::from_record(&record, registry);
                let correct = match object
                    .get("reward")
                    .and_then(|r| r.get("r_corr"))
                    .and_then(Value::as_f64)
                {
                    Some(r_corr) => r_corr > 0.0,
                    None => answer_matches(extract_answer(&transcript), &transcript.ground_truth),
                };
                out.push(Evaluated {
                    transcript,
                    correct,
                    object,
                });
            }
            Err(e) => {
                malformed += 1;
                info(format!("{}:{line}: {e}", path.display()));
            }
        }
    }
    Ok((out, malformed))
}

fn cmd_score(input: &Path, config: Option<&Path>, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config, None)?;
    let engine = reward_engine(&cfg)?;
    let text = read_input(input)?;
    let (scored, malformed) = score_corpus(&text, &engine);
    write_output(output, scored.as_bytes())?;
    let total = text.lines().filter(|l| !l.trim().is_empty()).count();
    eprintln!("scored {} record(s), {malformed} malformed", total - malformed);
    if malformed > 0 {
        Err(CliError::Malformed(malformed))
    } else {
        Ok(())
    }
}

fn cmd_metrics_tiu(
    input: &Path,
    group_by: &str,
    config: Option<&Path>,
    output: Option<&Path>,
    format: ReportFormat,
) -> Result<(), CliError> {
    let cfg = load_config(config, None)?;
    let registry = cfg.registry();
    let (evaluated, malformed) = load_evaluated(input, &registry)?;
    let records: Vec<(String, UsageRecord)> = evaluated
        .iter()
        .map(|e| {
            let group = e
                .object
                .get(group_by)
                .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_owned))
                .unwrap_or_else(|| "(none)".to_string());
            (group, UsageRecord::from_transcript(&e.transcript, &registry, e.correct))
        })
        .collect();
    let mut by_group = std::collections::BTreeMap::<String, Vec<UsageRecord>>::new();
    for (g, r) in records {
        by_group.entry(g).or_default().push(r);
    }
    let rows = by_group
        .iter()
        .map(|(g, recs)| crate::metrics::TiuRow::from_records(g.clone(), recs, &registry))
        .collect();
    let report = TiuReport::from_rows(rows);
    let rendered = match format {
        ReportFormat::Text => report.render_text(),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
    };
    write_output(output, rendered.as_bytes())?;
    if malformed > 0 {
        Err(CliError::Malformed(malformed))
    } else {
        Ok(())
    }
}

fn table_for(path: &Path, registry: &ToolRegistry) -> Result<(TransitionTable, usize), CliError> {
    let (evaluated, malformed) = load_evaluated(path, registry)?;
    let mut table = TransitionTable::new();
    for e in &evaluated {
        table.add_transcript(&e.transcript, e.correct);
    }
    Ok((table, malformed))
}

fn cmd_metrics_transitions(
    inputs: &[PathBuf],
    cutoff: u64,
    config: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_config(config, None)?;
    let registry = cfg.registry();
    let (a, bad_a) = table_for(&inputs[0], &registry)?;
    let (b, bad_b) = table_for(&inputs[1], &registry)?;
    let csv = diff_to_csv(&transition_diff(&a, &b, cutoff));
    write_output(output, csv.as_bytes())?;
    match bad_a + bad_b {
        0 => Ok(()),
        n => Err(CliError::Malformed(n)),
    }
}

fn cmd_train(
    config: Option<&Path>,
    seed: Option<u64>,
    output: Option<&Path>,
    policy_output: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let outcome = simenv::train(&cfg)?;
    let mut log = Vec::new();
    outcome.write_log(&mut log).map_err(io_err("serializing log"))?;
    write_output(output, &log)?;

    let policy_path = policy_output.map(Path::to_owned).or_else(|| {
        output.map(|o| {
            let mut name = o.as_os_str().to_owned();
            name.push(".policy.json");
            PathBuf::from(name)
        })
    });
    if let Some(p) = policy_path {
        let json = serde_json::to_vec_pretty(&outcome.policy).expect("policy serializes");
        write_output(Some(&p), &json)?;
    }
    match (outcome.log.first(), outcome.log.last()) {
        (Some(first), Some(last)) => info(format!(
            "mean total reward: initial {:.4} -> final {:.4} over {} iteration(s)",
            first.mean_total_scaled_reward,
            last.mean_total_scaled_reward,
            outcome.log.len()
        )),
        _ => info("no iterations run"),
    }
    Ok(())
}

fn cmd_gen_corpus(
    config: Option<&Path>,
    seed: Option<u64>,
    policy: Option<&Path>,
    count: u64,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let policy = match policy {
        Some(p) => {
            let text = read_input(p)?;
            let policy: PolicySnapshot = serde_json::from_str(&text).map_err(|e| CliError::Io {
                context: format!("reading policy {}", p.display()),
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            })?;
            if policy.num_states() != simenv::NUM_STATES || policy.num_actions() != cfg.env.num_actions() {
                return Err(CliError::Io {
                    context: format!("reading policy {}", p.display()),
                    source: io::Error::new(io::ErrorKind::InvalidData, "policy shape does not match the environment"),
                });
            }
            policy
        }
        None => simenv::initial_policy(&cfg.env),
    };
    let records = simenv::generate_corpus(&cfg, &policy, count as usize);
    let mut buf = Vec::new();
    simenv::write_corpus(&records, &mut buf).map_err(io_err("serializing corpus"))?;
    write_output(output, &buf)
}

fn cmd_validate_config(config: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config, None)?;
    let mut out = cfg.to_toml();
    let computed = cfg.reward.computed_n_norm();
    out.push_str(&format!("\n# computed n_norm = {computed}\n"));
    let stock = crate::reward::RewardWeights::default();
    let stock_reward = crate::reward::RewardWeights {
        n_norm: cfg.reward.n_norm,
        ..stock.clone()
    } == cfg.reward;
    if stock_reward {
        if computed == 21.6 {
            out.push_str("# n_norm check: computed maximum equals the stock value 21.6\n");
        } else {
            out.push_str(&format!("# n_norm check FAILED: computed {computed}, expected 21.6\n"));
        }
    }
    for w in cfg.warnings() {
        out.push_str(&format!("# warning: {w}\n"));
    }
    write_output(None, out.as_bytes())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score { input, config, output } => cmd_score(&input, config.as_deref(), output.as_deref()),
        Command::MetricsTiu {
            input,
            group_by,
            config,
            output,
            format,
        } => cmd_metrics_tiu(&input, &group_by, config.as_deref(), output.as_deref(), format),
        Command::MetricsTransitions {
            input,
            cutoff,
            config,
            output,
        } => cmd_metrics_transitions(&input, cutoff, config.as_deref(), output.as_deref()),
        Command::Train {
            config,
            seed,
            output,
            policy_output,
        } => cmd_train(config.as_deref(), seed, output.as_deref(), policy_output.as_deref()),
        Command::GenCorpus {
            config,
            seed,
            input,
            count,
            output,
        } => cmd_gen_corpus(config.as_deref(), seed, input.as_deref(), count, output.as_deref()),
        Command::ValidateConfig { config } => cmd_validate_config(config.as_deref()),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Command::MetricsTransitions { input, .. } = &cli.command {
        if input.len() != 2 {
            let mut cmd = <Cli as clap::CommandFactory>::command();
            let _ = cmd
                .error(
                    clap::error::ErrorKind::WrongNumberOfValues,
                    "metrics-transitions needs exactly two corpora: --input <A> --input <B>",
                )
                .print();
            return 2;
        }
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Malformed(_)) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
