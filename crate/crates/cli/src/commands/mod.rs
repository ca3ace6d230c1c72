pub mod bench;
pub mod calibrate;
pub mod make_data;
pub mod sample;
pub mod stats;
pub mod validate;

use std::path::{Path, PathBuf};

use tdas_core::io::export_image;
use tdas_core::ImageDataset;

use crate::manifest::create_dir;

/// Writes `dir/images/item_00000.pgm ...` (PPM for three channels), clamped
/// to `[0, 1]`.
pub(crate) fn export_images(ds: &ImageDataset, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let img_dir = dir.join("images");
    create_dir(&img_dir)?;
    let ext = if ds.shape().channels == 3 { "ppm" } else { "pgm" };
    ds.items()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let path = img_dir.join(format!("item_{i:05}.{ext}"));
            export_image(t, &path, 0.0, 1.0)?;
            Ok(path)
        })
        .collect()
}
