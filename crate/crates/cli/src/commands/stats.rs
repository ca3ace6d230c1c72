use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use tdas_core::io::{load_dataset, save_tensor};
use tdas_core::{freq_power_stats, FreqStats, TransformKind};

use crate::manifest::{absolute, create_dir, write_text, RunManifest};

pub const STATS_FILE: &str = "stats.tdt";
pub const PROFILE_FILE: &str = "radial.csv";

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Dataset or sample directory.
    #[arg(long)]
    pub samples: PathBuf,
    /// dct or dft.
    #[arg(long, default_value = "dct")]
    pub transform: TransformKind,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &StatsArgs) -> anyhow::Result<FreqStats> {
    let echo = serde_json::json!({ "samples": absolute(&args.samples)?, "transform": args.transform });
    let mut manifest = RunManifest::new("stats", echo, None);
    let ds = manifest.time("load", || {
        load_dataset(&args.samples).with_context(|| format!("loading {}", args.samples.display()))
    })?;
    let stats = manifest.time("stats", || freq_power_stats(&ds, args.transform));
    create_dir(&args.out)?;
    let tensor_path = args.out.join(STATS_FILE);
    save_tensor(&stats.power, &tensor_path)?;
    manifest.output(tensor_path);

    let mut csv = String::from("radius,mean_power,cells\n");
    for (r, p, n) in stats.radial_profile() {
        let _ = writeln!(csv, "{r},{p},{n}");
    }
    let csv_path = args.out.join(PROFILE_FILE);
    write_text(&csv_path, &csv)?;
    manifest.output(csv_path);
    manifest.write(&args.out)?;
    Ok(stats)
}
