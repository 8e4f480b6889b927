//! Command-line front end: configuration loading, subcommands and run
//! manifests.

// `is_multiple_of` is newer than the declared minimum toolchain.
#![allow(clippy::manual_is_multiple_of)]

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use shapelink_core::Error as CoreError;
use thiserror::Error;
use toml::{Table, Value};

pub mod commands;
pub mod config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn context(context: String, source: CoreError) -> Self {
        CliError::Context { context, source }
    }

    /// 2 for configuration problems, 3 for I/O, 4 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        let core = |e: &CoreError| {
            if e.is_io() {
                3
            } else if e.is_numeric() {
                4
            } else {
                2
            }
        };
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Context { source, .. } => core(source),
            CliError::Core(e) => core(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Parser)]
#[command(name = "shapelink", version, about = "Probabilistic and geometric constellation shaping workbench")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; replaces the `seed` key of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// `key.path=value` applied on top of the configuration file.
    #[arg(long = "override", short = 'o', global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Non-IDD end-to-end training of points and shaping probability.
    Train {
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Deep-unfolded IDD training of the constellation geometry.
    TrainIdd {
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// BER and FER versus Eb/N0 for one or more systems.
    Ber,
    /// BICM capacity curves and gap to Shannon.
    Capacity,
    /// Write a constellation (built-in, file or checkpoint) as JSON.
    Export,
    /// Validate a constellation JSON and write its canonical form.
    Import {
        /// Constellation file; replaces the `input` key.
        input: Option<PathBuf>,
    },
    /// List the built-in codes.
    Codes {
        /// Also write this code as an alist file into the output directory.
        #[arg(long)]
        write: Option<String>,
    },
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::TrainIdd { .. } => "train-idd",
            Command::Ber => "ber",
            Command::Capacity => "capacity",
            Command::Export => "export",
            Command::Import { .. } => "import",
            Command::Codes { .. } => "codes",
            Command::Replay { .. } => "replay",
        }
    }
}

pub const MANIFEST: &str = "manifest.toml";

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let (name, table, resume) = match &cli.command {
        Command::Codes { write } => return commands::codes(&cli.out, write.as_deref()),
        Command::Replay { manifest } => {
            let mut m = config::load_table(Some(manifest))?;
            let name = match m.remove("command") {
                Some(Value::String(s)) => s,
                _ => return Err(CliError::Config(format!("{}: missing `command`", manifest.display()))),
            };
            let table = match m.remove("config") {
                Some(Value::Table(t)) => t,
                _ => return Err(CliError::Config(format!("{}: missing [config]", manifest.display()))),
            };
            (name, table, None)
        }
        other => {
            let mut table = config::load_table(cli.config.as_deref())?;
            if let Some(seed) = cli.seed {
                let seed = i64::try_from(seed).map_err(|_| CliError::Config("--seed must fit in a signed 64-bit integer".into()))?;
                table.insert("seed".into(), Value::Integer(seed));
            }
            let resume = match other {
                Command::Train { resume } | Command::TrainIdd { resume } => resume.clone(),
                Command::Import { input: Some(p) } => {
                    table.insert("input".into(), Value::String(p.display().to_string()));
                    None
                }
                _ => None,
            };
            (other.name().to_string(), table, resume)
        }
    };
    let overrides: &[String] = if matches!(cli.command, Command::Replay { .. }) { &[] } else { &cli.overrides };
    execute(&name, table, overrides, &cli.out, resume.as_deref(), cli.threads)
}

/// What a command produced: its resolved configuration and the files it
/// wrote into the output directory.
pub struct Outcome {
    pub config: Table,
    pub artifacts: Vec<String>,
}

/// Reads the file table with defaults filled in, then applies the
/// overrides, so that `systems.0.link.code=...` works without a file.
fn resolve<T: serde::de::DeserializeOwned + serde::Serialize>(table: Table, overrides: &[String]) -> Result<T> {
    let parsed: T = config::from_table(table)?;
    if overrides.is_empty() {
        return Ok(parsed);
    }
    let mut full = config::to_table(&parsed)?;
    for o in overrides {
        config::apply_override(&mut full, o)?;
    }
    config::from_table(full)
}

fn execute(name: &str, t: Table, o: &[String], out: &Path, resume: Option<&Path>, threads: usize) -> Result<()> {
    create_dir(out)?;
    let outcome = match name {
        "train" => commands::train(resolve(t, o)?, out, resume)?,
        "train-idd" => commands::train_idd(resolve(t, o)?, out, resume)?,
        "ber" => commands::ber(resolve(t, o)?, out)?,
        "capacity" => commands::capacity(resolve(t, o)?, out)?,
        "export" => commands::export(resolve(t, o)?, out)?,
        "import" => commands::import(resolve(t, o)?, out)?,
        other => return Err(CliError::Config(format!("unknown command {other:?}"))),
    };
    let manifest = manifest(name, threads, resume, &outcome)?;
    write_file(&out.join(MANIFEST), &manifest)?;
    eprintln!("wrote {} to {}", outcome.artifacts.join(", "), out.display());
    Ok(())
}

fn manifest(name: &str, threads: usize, resume: Option<&Path>, o: &Outcome) -> Result<String> {
    let mut t = Table::new();
    t.insert("command".into(), Value::String(name.into()));
    t.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    if let Some(seed) = o.config.get("seed") {
        t.insert("seed".into(), seed.clone());
    }
    t.insert("threads".into(), Value::Integer(threads as i64));
    if let Some(p) = resume {
        t.insert("resumed_from".into(), Value::String(p.display().to_string()));
    }
    let mut files = o.artifacts.clone();
    files.push(MANIFEST.into());
    t.insert("artifacts".into(), Value::Array(files.into_iter().map(Value::String).collect()));
    t.insert("config".into(), Value::Table(o.config.clone()));
    toml::to_string(&t).map_err(|e| CliError::Config(format!("cannot write manifest: {e}")))
}
