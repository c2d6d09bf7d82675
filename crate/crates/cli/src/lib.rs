//! The `udat` command-line driver. [`run`] parses an argument vector,
//! executes one library operation and returns the process exit code:
//! 0 on success, 1 on a data error, 2 on a usage error.

mod commands;
mod experiment;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use udat::corpus::{load_canonical, Corpus, CorpusError, Namespace, Side, Split};
use udat::experiments::{ExperimentError, RunManifest};
use udat::model::{ContextFeed, ModelError};
use udat::schema::SchemaError;
use udat::training::TrainingError;

#[derive(Debug, Parser)]
#[command(name = "udat", version, about = "Universal dialogue-act alignment and tagging")]
struct Cli {
    /// Master seed; when omitted a random seed is drawn and recorded.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reads a native dataset into the canonical format, labels untouched.
    Ingest(IngestArgs),
    /// Maps a native or canonical corpus onto the universal schema.
    Align(AlignArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
    /// Act frequency distribution of one side.
    Distribution(DistributionArgs),
    /// Trains a tagger.
    Train(TrainArgs),
    /// Labels a corpus with a trained tagger.
    Tag(TagArgs),
    /// Scores a tagger on a gold corpus.
    Eval(EvalArgs),
    /// Experiment drivers.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Runs the alignment and heuristic fixture suites.
    Fixtures(FixturesArgs),
    /// Generates a synthetic universal corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Train-on-one, test-on-all transfer matrix.
    Matrix(ExperimentArgs),
    /// Learning curve over labeled-turn budgets.
    Curve(ExperimentArgs),
    /// Teacher labels an unlabeled corpus; a student trains on the labels.
    Selftrain(ExperimentArgs),
    /// Leave-one-domain-out runs.
    Loo(ExperimentArgs),
}

fn parse_dataset(s: &str) -> Result<Namespace, String> {
    s.parse::<Namespace>().map_err(|e| e.to_string())
}

fn parse_side(s: &str) -> Result<Side, String> {
    s.parse::<Side>().map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse::<Split>().map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Feed {
    Predicted,
    Gold,
}

impl From<Feed> for ContextFeed {
    fn from(f: Feed) -> Self {
        match f {
            Feed::Predicted => ContextFeed::Predicted,
            Feed::Gold => ContextFeed::GoldIfPresent,
        }
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long, value_parser = parse_dataset)]
    dataset: Namespace,
    /// Native path; defaults to the dataset's place under UDAT_DATA_DIR.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    #[arg(long, env = "UDAT_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Canonical output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Unmapped {
    Error,
    Drop,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// Native dataset of `--in`; omit to read a canonical corpus.
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<Namespace>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    #[arg(long, env = "UDAT_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Rule file; the built-in rules when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Disables a schema modification (repeatable): mod1..mod4.
    #[arg(long = "disable-mod")]
    disable_mod: Vec<String>,
    #[arg(long, value_enum, default_value = "error")]
    unmapped: Unmapped,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Report directory; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DistributionArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_side, default_value = "system")]
    side: Side,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training corpus (repeatable; corpora are pooled).
    #[arg(long = "in", required = true)]
    input: Vec<PathBuf>,
    /// Development corpus (repeatable).
    #[arg(long, required = true)]
    dev: Vec<PathBuf>,
    /// JSON with optional `model` and `train` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_side)]
    side: Option<Side>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory for the checkpoint and report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Sides to label: system or both.
    #[arg(long, value_parser = parse_side, default_value = "both")]
    side: Side,
    #[arg(long, value_enum, default_value = "predicted")]
    feed: Feed,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_side, default_value = "system")]
    side: Side,
    #[arg(long, value_enum, default_value = "gold")]
    feed: Feed,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_parser = parse_side)]
    side: Option<Side>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FixturesArgs {
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Share of turns whose labels are corrupted.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// JSON grammar; the built-in task-oriented grammar when omitted.
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn data<E: fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        data(e)
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        match e {
            SchemaError::RuleFile(_) => CliError::Usage(e.to_string()),
            e => data(e),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            e => data(e),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            TrainingError::Model(m) => m.into(),
            e => data(e),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            ExperimentError::Training(t) => t.into(),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Schema(s) => s.into(),
            e => data(e),
        }
    }
}

/// Shared state of one invocation: the seed flag and the manifest being
/// assembled.
struct Run {
    seed_flag: Option<u64>,
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    /// The seed to force onto every seed field of a config, or `None` to
    /// keep the config's own seeds. `--seed` wins; otherwise explicit
    /// seeds in the config are kept; otherwise a random seed is drawn.
    fn seed_for(&self, raw: &Value, pointers: &[&str]) -> Option<u64> {
        match self.seed_flag {
            Some(s) => Some(s),
            None if pointers.iter().any(|p| raw.pointer(p).is_some()) => None,
            None => Some(rand::random::<u32>() as u64),
        }
    }

    fn record_seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.to_string(), seed);
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.add_input(path).map_err(data)
    }

    fn set_config<T: Serialize>(&mut self, config: &T) {
        self.manifest.config = serde_json::to_value(config).expect("config serializes");
    }

    /// Writes `value` as `<dir>/<name>` or prints it when there is no
    /// output directory.
    fn report<T: Serialize>(&mut self, out: Option<&Path>, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        match out {
            Some(dir) => {
                let path = dir.join(name);
                write_file(&path, text.as_bytes())?;
                self.manifest.outputs.push(path.display().to_string());
            }
            None => println!("{text}"),
        }
        Ok(())
    }

    /// Loads a canonical corpus and records its hash.
    fn corpus(&mut self, path: &Path) -> CliResult<Corpus> {
        let c = load_canonical(path)?;
        self.input(path)?;
        Ok(c)
    }

    fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    fn finish(mut self, manifest_path: Option<PathBuf>) -> CliResult<()> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        if let Some(p) = manifest_path {
            self.manifest.write_atomic(&p).map_err(data)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

/// Manifest path next to a file output: `c.jsonl` → `c.manifest.json`.
fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: invalid JSON: {e}", path.display())))
}

fn from_value<T: serde::de::DeserializeOwned>(value: Value, origin: &Path) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", origin.display())))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let argv_command = command_name(&cli.command);
    let mut run = Run {
        seed_flag: cli.seed,
        manifest: RunManifest::new(argv_command, Value::Null),
        start: Instant::now(),
    };
    match cli.command {
        Command::Ingest(a) => commands::ingest(&mut run, a).and_then(|m| run.finish(m)),
        Command::Align(a) => commands::align(&mut run, a).and_then(|m| run.finish(m)),
        Command::Stats(a) => commands::stats(&mut run, a).and_then(|m| run.finish(m)),
        Command::Distribution(a) => commands::distribution(&mut run, a).and_then(|m| run.finish(m)),
        Command::Train(a) => commands::train(&mut run, a).and_then(|m| run.finish(m)),
        Command::Tag(a) => commands::tag(&mut run, a).and_then(|m| run.finish(m)),
        Command::Eval(a) => commands::eval(&mut run, a).and_then(|m| run.finish(m)),
        Command::Fixtures(a) => commands::fixtures(&mut run, a).and_then(|m| run.finish(m)),
        Command::Synth(a) => commands::synth(&mut run, a).and_then(|m| run.finish(m)),
        Command::Experiment(e) => match e {
            ExperimentCommand::Matrix(a) => experiment::matrix(&mut run, a),
            ExperimentCommand::Curve(a) => experiment::curve(&mut run, a),
            ExperimentCommand::Selftrain(a) => experiment::selftrain(&mut run, a),
            ExperimentCommand::Loo(a) => experiment::loo(&mut run, a),
        }
        .and_then(|m| run.finish(m)),
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Align(_) => "align",
        Command::Stats(_) => "stats",
        Command::Distribution(_) => "distribution",
        Command::Train(_) => "train",
        Command::Tag(_) => "tag",
        Command::Eval(_) => "eval",
        Command::Fixtures(_) => "fixtures",
        Command::Synth(_) => "synth",
        Command::Experiment(ExperimentCommand::Matrix(_)) => "experiment matrix",
        Command::Experiment(ExperimentCommand::Curve(_)) => "experiment curve",
        Command::Experiment(ExperimentCommand::Selftrain(_)) => "experiment selftrain",
        Command::Experiment(ExperimentCommand::Loo(_)) => "experiment loo",
    }
    .to_string()
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = cli.jobs;
    let outcome = match jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(data(e)),
        },
        None => dispatch(cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nRun `udat --help` for usage.");
            2
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}
