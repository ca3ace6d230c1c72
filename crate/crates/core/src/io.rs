//! Tensor files, PGM/PPM export and on-disk datasets.
//!
//! Tensor file layout (`TDT1`): the ASCII magic `TDT1`, then `C`, `H`, `W` as
//! little-endian `u32`, then `C*H*W` little-endian IEEE-754 `f64` in `(c, h, w)`
//! row-major order. Nothing follows the payload.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ImageDataset, Shape, Tensor};

pub const TENSOR_MAGIC: &[u8; 4] = b"TDT1";
const HEADER_LEN: usize = 16;

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let s = t.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    for d in [s.channels, s.height, s.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let dim = |i: usize| {
        let off = 4 + 4 * i;
        u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
    };
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let shape =
        Shape::new(c, h, w).map_err(|_| Error::format(path, format!("zero dimension in {c}x{h}x{w}")))?;
    let expected = shape
        .len()
        .checked_mul(8)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::format(path, "shape overflows"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {}", bytes.len() - HEADER_LEN, expected - HEADER_LEN),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Tensor::from_vec(shape, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, path)
}

/// Maps `[lo, hi]` affinely onto `0..=255`. Out-of-range values clamp; the
/// scaled value rounds half away from zero, so the midpoint becomes 128.
pub fn to_pixel(v: f64, lo: f64, hi: f64) -> u8 {
    let scaled = (v - lo) / (hi - lo) * 255.0;
    scaled.clamp(0.0, 255.0).round() as u8
}

/// Writes a binary PGM (1 channel) or PPM (3 channels) with maxval 255.
pub fn export_image(t: &Tensor, path: impl AsRef<Path>, lo: f64, hi: f64) -> Result<()> {
    let path = path.as_ref();
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("clamp range [{lo}, {hi}] is empty")));
    }
    let s = t.shape();
    let magic = match s.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::UnsupportedChannels(c)),
    };
    let mut buf = Vec::with_capacity(32 + t.len());
    write!(buf, "{magic}\n{} {}\n255\n", s.width, s.height).unwrap();
    for h in 0..s.height {
        for w in 0..s.width {
            for c in 0..s.channels {
                buf.push(to_pixel(t[(c, h, w)], lo, hi));
            }
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub const DATASET_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub count: usize,
    pub shape: Shape,
    /// Free-form description of how the items were produced.
    #[serde(default)]
    pub spec: serde_json::Value,
    pub files: Vec<String>,
}

pub fn item_file_name(i: usize) -> String {
    format!("item_{i:05}.tdt")
}

/// Writes `dir/item_00000.tdt ...` and `dir/manifest.json`.
pub fn save_dataset(ds: &ImageDataset, dir: impl AsRef<Path>, spec: serde_json::Value) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(ds.len());
    let mut written = Vec::with_capacity(ds.len() + 1);
    for (i, item) in ds.items().iter().enumerate() {
        let name = item_file_name(i);
        let path = dir.join(&name);
        save_tensor(item, &path)?;
        files.push(name);
        written.push(path);
    }
    let manifest = DatasetManifest {
        count: ds.len(),
        shape: ds.shape(),
        spec,
        files,
    };
    let mpath = dir.join(DATASET_MANIFEST);
    fs::write(&mpath, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
    written.push(mpath);
    Ok(written)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<ImageDataset> {
    let dir = dir.as_ref();
    let mpath = dir.join(DATASET_MANIFEST);
    let raw = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: DatasetManifest = serde_json::from_slice(&raw)?;
    if manifest.files.len() != manifest.count {
        return Err(Error::format(&mpath, "count does not match file list"));
    }
    let items = manifest
        .files
        .iter()
        .map(|f| load_tensor(dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    let ds = ImageDataset::new(items)?;
    if ds.shape() != manifest.shape {
        return Err(Error::format(&mpath, "item shape differs from manifest"));
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSource;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let t = NoiseSource::new(1).draw_normal(Shape::new(3, 8, 8).unwrap());
        let p = dir.path().join("t.tdt");
        save_tensor(&t, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"TDT1");
        assert_eq!(bytes.len(), 16 + 8 * 192);
        let back = load_tensor(&p).unwrap();
        assert_eq!(
            back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn truncated_file_is_format_error() {
        let t = Tensor::ones(Shape::new(1, 2, 2).unwrap());
        let bytes = encode_tensor(&t);
        let p = Path::new("mem");
        assert!(matches!(decode_tensor(&bytes[..bytes.len() - 3], p), Err(Error::Format { .. })));
        assert!(matches!(decode_tensor(&bytes[..10], p), Err(Error::Format { .. })));
    }

    #[test]
    fn zero_channel_header_is_format_error() {
        let mut bytes = encode_tensor(&Tensor::ones(Shape::new(1, 2, 2).unwrap()));
        bytes[4..8].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_tensor(&bytes, Path::new("mem")), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_tensor(&Tensor::ones(Shape::new(1, 1, 1).unwrap()));
        bytes[0] = b'X';
        assert!(matches!(decode_tensor(&bytes, Path::new("mem")), Err(Error::Format { .. })));
    }

    fn pixels(path: &Path) -> Vec<u8> {
        let bytes = fs::read(path).unwrap();
        // header is three newline-terminated lines
        let mut seen = 0;
        let start = bytes
            .iter()
            .position(|&b| {
                if b == b'\n' {
                    seen += 1;
                }
                seen == 3
            })
            .unwrap();
        bytes[start + 1..].to_vec()
    }

    #[test]
    fn export_extremes_and_midpoint() {
        let dir = tempfile::tempdir().unwrap();
        let s = Shape::new(1, 2, 3).unwrap();
        let p = dir.path().join("a.pgm");
        export_image(&Tensor::filled(s, -1.0), &p, -1.0, 1.0).unwrap();
        assert!(fs::read(&p).unwrap().starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(pixels(&p), vec![0; 6]);
        export_image(&Tensor::filled(s, 1.0), &p, -1.0, 1.0).unwrap();
        assert_eq!(pixels(&p), vec![255; 6]);
        export_image(&Tensor::filled(s, 0.0), &p, -1.0, 1.0).unwrap();
        assert_eq!(pixels(&p), vec![128; 6]);
        assert_eq!(to_pixel(7.0, 0.0, 1.0), 255);
        assert_eq!(to_pixel(-7.0, 0.0, 1.0), 0);
    }

    #[test]
    fn export_rgb_and_reject_two_channels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        let t = Tensor::from_fn(Shape::new(3, 1, 1).unwrap(), |c, _, _| c as f64 / 2.0).unwrap();
        export_image(&t, &p, 0.0, 1.0).unwrap();
        assert_eq!(pixels(&p), vec![0, 128, 255]);
        let two = Tensor::zeros(Shape::new(2, 1, 1).unwrap());
        assert!(matches!(export_image(&two, &p, 0.0, 1.0), Err(Error::UnsupportedChannels(2))));
    }

    #[test]
    fn dataset_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut src = NoiseSource::new(3);
        let s = Shape::new(1, 4, 4).unwrap();
        let ds = ImageDataset::new((0..3).map(|_| src.draw_normal(s)).collect()).unwrap();
        save_dataset(&ds, dir.path(), serde_json::json!({"kind": "test"})).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }
}
