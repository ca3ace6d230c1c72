use std::fmt::Write as _;
use std::hint::black_box;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Args;
use tdas_core::{apply_tdas, FreqFilterParams, NoiseSource, Shape, SpaceFilter, TdasFilter, Tensor, TransformKind};

use crate::manifest::{create_dir, write_text, RunManifest};

pub const BENCH_FILE: &str = "bench.csv";

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Square resolutions to time, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub filter_overhead: Vec<usize>,
    /// Channels of the timed input.
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    /// Timed runs per size; the median is reported.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// dct or dft.
    #[arg(long, default_value = "dct")]
    pub transform: TransformKind,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub size: usize,
    pub median: Duration,
    pub min: Duration,
    pub max: Duration,
}

/// Wall times of `repeats` calls of `apply_tdas` with a non-trivial three-zone
/// filter on a `channels x size x size` input, after one warm-up call.
pub fn time_apply_tdas(
    channels: usize,
    size: usize,
    transform: TransformKind,
    repeats: usize,
) -> anyhow::Result<Vec<Duration>> {
    let shape = Shape::new(channels, size, size)?;
    let params = FreqFilterParams::three_zone(0.9, 0.7, 0.3, 0.6, transform)?;
    let space = SpaceFilter::from_mask(Tensor::from_fn(shape, |_, h, w| 0.5 + 0.5 * ((h + w) % 2) as f64)?)?;
    let filter = TdasFilter::from_params(space, &params)?;
    let z = NoiseSource::new(size as u64).draw_normal(shape);
    black_box(apply_tdas(&z, filter.space(), filter.freq(), transform)?);
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            black_box(apply_tdas(black_box(&z), filter.space(), filter.freq(), transform)?);
            Ok(t.elapsed())
        })
        .collect()
}

pub fn median(times: &[Duration]) -> Duration {
    let mut v = times.to_vec();
    v.sort();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

pub fn run(args: &BenchArgs) -> anyhow::Result<Vec<BenchRow>> {
    if args.repeats == 0 {
        anyhow::bail!("--repeats must be at least 1");
    }
    let echo = serde_json::json!({
        "filter_overhead": args.filter_overhead,
        "channels": args.channels,
        "repeats": args.repeats,
        "transform": args.transform,
    });
    let mut manifest = RunManifest::new("bench", echo, None);
    let mut rows = Vec::new();
    for &size in &args.filter_overhead {
        let times = manifest.time(&format!("size {size}"), || {
            time_apply_tdas(args.channels, size, args.transform, args.repeats)
        })?;
        rows.push(BenchRow {
            size,
            median: median(&times),
            min: *times.iter().min().unwrap(),
            max: *times.iter().max().unwrap(),
        });
    }
    let mut csv = String::from("size,channels,repeats,median_s,min_s,max_s\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.9},{:.9},{:.9}",
            r.size,
            args.channels,
            args.repeats,
            r.median.as_secs_f64(),
            r.min.as_secs_f64(),
            r.max.as_secs_f64()
        );
    }
    create_dir(&args.out)?;
    let path = args.out.join(BENCH_FILE);
    write_text(&path, &csv)?;
    manifest.output(path);
    manifest.write(&args.out)?;
    Ok(rows)
}
