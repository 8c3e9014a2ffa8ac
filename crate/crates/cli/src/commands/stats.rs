use std::path::PathBuf;

use clap::Args;
use lttext::model::{dataset_stats, validate_manifest};
use lttext::report::render_stats;

use crate::{CliResult, Ctx};

use super::{emit, load_manifest, log_diagnostics, output_format, parse_mode};

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Canonical manifest to summarize.
    #[arg(long)]
    gt: PathBuf,
}

pub fn run(ctx: &Ctx, args: &StatsArgs) -> CliResult {
    let format = output_format(ctx)?;
    let manifest = load_manifest(&args.gt, parse_mode(ctx))?;
    log_diagnostics(&validate_manifest(&manifest));
    let stats = dataset_stats(&manifest);
    emit(ctx, &render_stats(&stats, format))
}
