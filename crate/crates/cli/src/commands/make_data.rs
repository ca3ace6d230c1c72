use std::path::PathBuf;

use clap::Args;
use tdas_core::io::save_dataset;
use tdas_core::noise::label_seed;
use tdas_core::{generate, Shape, SynthKind, SynthSpec};

use super::export_images;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Args)]
pub struct MakeDataArgs {
    /// low_freq_blobs, face_like or unstructured.
    #[arg(long)]
    pub kind: SynthKind,
    /// Number of items.
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    /// Channels per item.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Image height.
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    /// Defaults to the height.
    #[arg(long)]
    pub width: Option<usize>,
    /// Power-law exponent of the spectral envelope.
    #[arg(long, default_value_t = 2.0)]
    pub decay: f64,
    /// Master seed; the generator seed is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write PGM/PPM previews under OUT/images.
    #[arg(long)]
    pub images: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &MakeDataArgs) -> anyhow::Result<RunManifest> {
    let spec = SynthSpec {
        kind: args.kind,
        count: args.count,
        shape: Shape::new(args.channels, args.height, args.width.unwrap_or(args.height))?,
        spectral_decay: args.decay,
        seed: label_seed(args.seed, "make-data"),
    };
    let echo = serde_json::to_value(&spec)?;
    let mut manifest = RunManifest::new("make-data", echo.clone(), Some(args.seed));
    let ds = manifest.time("generate", || generate(&spec))?;
    let written = manifest.time("write", || save_dataset(&ds, &args.out, echo))?;
    written.into_iter().for_each(|p| manifest.output(p));
    if args.images {
        export_images(&ds, &args.out)?.into_iter().for_each(|p| manifest.output(p));
    }
    log::info!("wrote {} items to {}", ds.len(), args.out.display());
    manifest.clone().write(&args.out)?;
    Ok(manifest)
}
