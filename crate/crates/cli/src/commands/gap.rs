use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use lttext::eval::gap_report;
use lttext::formats::parse_gap_cells;
use lttext::report::render_gap;

use crate::{CliResult, Ctx};

use super::{emit, output_format};

#[derive(Debug, Args)]
pub struct GapArgs {
    /// Cross-evaluation cells as CSV lines `train,test,f_measure`.
    #[arg(long)]
    cells: PathBuf,
}

pub fn run(ctx: &Ctx, args: &GapArgs) -> CliResult {
    let format = output_format(ctx)?;
    let bytes = std::fs::read(&args.cells)
        .with_context(|| format!("cannot read {}", args.cells.display()))?;
    let cells = parse_gap_cells(&bytes)
        .with_context(|| format!("cannot parse {}", args.cells.display()))?;
    let matrix = gap_report(&cells).context("gap report failed")?;
    emit(ctx, &render_gap(&matrix, format))
}
