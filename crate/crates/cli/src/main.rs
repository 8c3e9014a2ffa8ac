//! `lttext`: one binary exposing the whole pipeline as git-style
//! subcommands: convert, eval, filter-undetected, merge, dedup, stats,
//! gap-report, br-loss.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Reports
//! go to stdout (or `--out`); diagnostics go to stderr. A TOML config file
//! (`--config`) supplies flag defaults; explicit flags always win.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::ConfigFile;

#[derive(Debug, Parser)]
#[command(
    name = "lttext",
    version,
    about = "Scene text detection evaluation and benchmark tooling"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Worker threads for per-image work (default: all cores). Any value
    /// produces identical reports.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Reject malformed entries instead of dropping them with a warning.
    #[arg(long, global = true)]
    strict: bool,

    /// Report format for table-like outputs: json, csv, or markdown.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Write the primary report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// TOML file with flag defaults, merged under explicit flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// Everything a subcommand needs: the parsed flags plus config-file
/// defaults.
pub struct Ctx {
    pub global: GlobalOpts,
    pub config: ConfigFile,
}

impl Ctx {
    pub fn strict(&self) -> bool {
        self.global.strict || self.config.strict.unwrap_or(false)
    }

    pub fn format_name(&self) -> &str {
        self.global
            .format
            .as_deref()
            .or(self.config.format.as_deref())
            .unwrap_or("json")
    }

    pub fn out(&self) -> Option<&PathBuf> {
        self.global.out.as_ref()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert source annotation formats to canonical JSON.
    Convert(commands::convert::ConvertArgs),
    /// Evaluate detections against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Keep only ground-truth instances no detector found.
    FilterUndetected(commands::filter::FilterArgs),
    /// Build joint train/test manifests from a merge plan.
    Merge(commands::merge::MergeArgs),
    /// Find near-duplicate images by perceptual hash.
    Dedup(commands::dedup::DedupArgs),
    /// Distribution statistics for a manifest.
    Stats(commands::stats::StatsArgs),
    /// Fine-tuning gap matrix from cross-evaluation cells.
    GapReport(commands::gap::GapArgs),
    /// Balanced reconstruction loss of an image pair under a guidance mask.
    BrLoss(commands::brloss::BrLossArgs),
}

/// A user-facing failure: either the invocation is wrong (exit 1) or the
/// data is (exit 2).
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Data(err.into())
    }
}

pub type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LTTEXT_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let config = match &cli.global.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(config) => config,
            Err(err) => {
                eprintln!("error: {err:#}");
                return ExitCode::from(2);
            }
        },
        None => ConfigFile::default(),
    };

    if let Some(threads) = cli.global.threads.or(config.threads) {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {err}");
            return ExitCode::from(2);
        }
    }

    let ctx = Ctx {
        global: cli.global,
        config,
    };
    let result = match &cli.command {
        Command::Convert(args) => commands::convert::run(&ctx, args),
        Command::Eval(args) => commands::eval::run(&ctx, args),
        Command::FilterUndetected(args) => commands::filter::run(&ctx, args),
        Command::Merge(args) => commands::merge::run(&ctx, args),
        Command::Dedup(args) => commands::dedup::run(&ctx, args),
        Command::Stats(args) => commands::stats::run(&ctx, args),
        Command::GapReport(args) => commands::gap::run(&ctx, args),
        Command::BrLoss(args) => commands::brloss::run(&ctx, args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
