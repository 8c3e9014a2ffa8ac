use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use lttext::formats::write_canonical;
use lttext::merge::{build_joint, load_plan};
use lttext::report::render_merge;

use crate::{CliResult, Ctx};

use super::{emit, output_format, write_file};

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Merge plan (TOML or JSON) listing manifests and per-dataset policies.
    #[arg(long)]
    plan: PathBuf,

    /// Write the joint train manifest here.
    #[arg(long)]
    out_train: Option<PathBuf>,

    /// Write the joint test manifest here.
    #[arg(long)]
    out_test: Option<PathBuf>,

    /// Shuffle ratio splits with this seed instead of splitting in image-id
    /// order. Equal seeds give equal splits.
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

pub fn run(ctx: &Ctx, args: &MergeArgs) -> CliResult {
    let format = output_format(ctx)?;
    let shuffle_seed = args.shuffle_seed.or(ctx.config.merge.shuffle_seed);
    let plan = load_plan(&args.plan, shuffle_seed)
        .with_context(|| format!("cannot load plan {}", args.plan.display()))?;
    let output = build_joint(&plan).context("merge failed")?;

    if let Some(path) = &args.out_train {
        write_file(path, &write_canonical(&output.train))?;
    }
    if let Some(path) = &args.out_test {
        write_file(path, &write_canonical(&output.test))?;
    }
    emit(ctx, &render_merge(&output.report, format))
}
