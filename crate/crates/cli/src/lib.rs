//! `intent2dag` command line.
//!
//! Exit codes: 0 success, 1 domain outcome (rejected, failed, lint findings),
//! 2 usage, 3 I/O or configuration, 4 service unreachable.

mod offline;
mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use intent2dag_core::config::{Config, ConfigError, ExtractorKind};
use intent2dag_core::skills::SkillConfig;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "intent2dag", version, about = "Natural-language research queries to 1000 Genomes workflow DAGs")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for config.toml, session journals and outputs.
    #[arg(long, global = true, default_value = ".i2d")]
    pub workspace: PathBuf,
    /// Config file; defaults to <workspace>/config.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Skill configuration (S0..S3); overrides [conductor].skill_config.
    #[arg(long, global = true)]
    pub skills: Option<SkillConfig>,
    /// rule, llm or recorded; overrides [conductor].extractor.
    #[arg(long, global = true)]
    pub extractor: Option<ExtractorKind>,
    /// More log output on stderr (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Skill library tools.
    Skills {
        #[command(subcommand)]
        command: SkillsCommand,
    },
    /// Compose a workflow offline from an intent file or a query.
    Compose(ComposeArgs),
    /// Run the full pipeline for a query through the conductor service.
    Run(RunArgs),
    /// Host the conductor service.
    Serve(ServeArgs),
    /// Score extraction on a query dataset across Skill configurations.
    Eval(EvalArgs),
    /// Rebuild a session from its journal and print its provenance.
    Replay {
        journal: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SkillsCommand {
    /// Parse and cross-check Skill documents.
    Lint {
        /// Directory of markdown documents; the configured or bundled library otherwise.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Calibration {
    /// Cluster vCPUs used for provisioning and execution.
    #[arg(long)]
    pub vcpus: Option<u32>,
    #[arg(long)]
    pub max_parallelism: Option<u32>,
    #[arg(long)]
    pub rows_per_task: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// ResearchIntent JSON file (`-` for stdin).
    #[arg(long, conflicts_with = "query", required_unless_present = "query")]
    pub intent: Option<PathBuf>,
    /// Query text, extracted with the configured extractor.
    #[arg(long)]
    pub query: Option<String>,
    /// Measurements JSON; staged against the fixtures when absent.
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    /// Measurement timestamp (RFC 3339) used when staging against fixtures.
    #[arg(long)]
    pub measured_at: Option<String>,
    /// Write the DAG here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Stop after the advisory plan.
    #[arg(long)]
    pub plan_only: bool,
    #[command(flatten)]
    pub calibration: Calibration,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub query: String,
    /// Approve both gates automatically (recorded as synthetic approvals).
    #[arg(long)]
    pub yes: bool,
    /// Conductor service URL; an in-process service is started otherwise.
    #[arg(long)]
    pub server: Option<String>,
    /// Clarification answers, used in order before prompting.
    #[arg(long = "answer")]
    pub answers: Vec<String>,
    /// Where to write workflow.json; <workspace>/workflows/<session>.json otherwise.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Give up waiting on the service after this many seconds per phase.
    #[arg(long, default_value_t = 120)]
    pub timeout_s: u64,
    #[command(flatten)]
    pub calibration: Calibration,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON-lines dataset; the configured or bundled dataset otherwise.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "S0,S1,S2,S3")]
    pub configs: Vec<SkillConfig>,
    /// table, csv or json.
    #[arg(long, default_value = "table")]
    pub report: String,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Domain(String),
    /// A domain outcome whose result was already written to stdout.
    Reported(String),
    Usage(String),
    Io(String),
    Unreachable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) | CliError::Reported(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Unreachable(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Reported(m) | CliError::Usage(m) | CliError::Io(m) | CliError::Unreachable(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Loads the config file and applies flag overrides.
fn load_config(cli: &Cli, calibration: Option<&Calibration>) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let mut c = Config::load(path)?;
            c.workspace = cli.workspace.clone();
            c
        }
        None => Config::load_workspace(&cli.workspace)?,
    };
    if let Some(s) = cli.skills {
        config.conductor.skill_config = s;
    }
    if let Some(e) = cli.extractor {
        config.conductor.extractor = e;
    }
    if let Some(c) = calibration {
        if let Some(v) = c.vcpus {
            config.deploy.vcpus = v;
        }
        if let Some(m) = c.max_parallelism {
            config.calibration.max_parallelism = m;
        }
        if let Some(r) = c.rows_per_task {
            config.calibration.rows_per_task_target = r;
        }
    }
    Ok(config)
}

pub(crate) fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("I2D_LOG").unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::from)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Skills {
            command: SkillsCommand::Lint { dir },
        } => offline::lint(cli, dir.as_deref()),
        Command::Compose(args) => offline::compose(cli, args, load_config(cli, Some(&args.calibration))?),
        Command::Eval(args) => offline::eval(cli, args, load_config(cli, None)?),
        Command::Replay { journal } => offline::replay(cli, journal, load_config(cli, None)?),
        Command::Run(args) => {
            let config = load_config(cli, Some(&args.calibration))?;
            runtime()?.block_on(pipeline::run(cli, args, config))
        }
        Command::Serve(args) => {
            let config = load_config(cli, None)?;
            runtime()?.block_on(pipeline::serve(args, config))
        }
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            if cli.json && !matches!(e, CliError::Reported(_)) {
                print_json(&serde_json::json!({ "error": e.message(), "exit_code": e.exit_code() }));
            }
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
