use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use tdas_core::io::load_dataset;
use tdas_core::{calibrate, freq_power_stats, ratio_grid, CalibDirection, Error, FreqFilterParams, TransformKind};

use crate::manifest::{absolute, create_dir, write_json, write_text, RunManifest};

pub const PARAMS_FILE: &str = "params.json";
pub const KAPPA_FILE: &str = "kappa.csv";
pub const REPORT_FILE: &str = "calibration.json";

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Samples from the well-converged (reference) sampler.
    #[arg(long)]
    pub reference: PathBuf,
    /// Samples from the sampler being corrected.
    #[arg(long)]
    pub generated: PathBuf,
    /// sgm (high frequencies amplified) or ddpm (attenuated).
    #[arg(long, default_value = "sgm")]
    pub direction: CalibDirection,
    /// dct or dft.
    #[arg(long, default_value = "dct")]
    pub transform: TransformKind,
    /// Emit identity parameters instead of failing when kappa never reaches
    /// the quantile thresholds.
    #[arg(long)]
    pub allow_identity: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub params: FreqFilterParams,
    pub direction: CalibDirection,
    /// Mean of the ratio grid.
    pub average: Option<f64>,
    pub quantiles: Option<(f64, f64)>,
    /// True when the identity fallback replaced a failed calibration.
    pub fallback: bool,
    pub failure: Option<String>,
}

fn kappa_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("r,kappa\n");
    for (r, k) in curve {
        let _ = writeln!(s, "{r},{k}");
    }
    s
}

pub fn run(args: &CalibrateArgs) -> anyhow::Result<CalibrationReport> {
    let echo = serde_json::json!({
        "reference": absolute(&args.reference)?,
        "generated": absolute(&args.generated)?,
        "direction": args.direction,
        "transform": args.transform,
        "allow_identity": args.allow_identity,
    });
    let mut manifest = RunManifest::new("calibrate", echo, None);
    let (reference, generated) = manifest.time("load", || -> anyhow::Result<_> {
        let load = |p: &Path| load_dataset(p).with_context(|| format!("loading {}", p.display()));
        Ok((load(&args.reference)?, load(&args.generated)?))
    })?;
    create_dir(&args.out)?;
    let result = manifest.time("calibrate", || -> anyhow::Result<_> {
        let grid = ratio_grid(
            &freq_power_stats(&generated, args.transform),
            &freq_power_stats(&reference, args.transform),
        )?;
        Ok(calibrate(&grid, args.direction, args.transform))
    })?;

    let kappa_path = args.out.join(KAPPA_FILE);
    let report = match result {
        Ok(cal) => {
            write_text(&kappa_path, &kappa_csv(&cal.kappa_curve))?;
            CalibrationReport {
                params: cal.params,
                direction: cal.direction,
                average: Some(cal.average),
                quantiles: Some(cal.quantiles),
                fallback: false,
                failure: None,
            }
        }
        Err(Error::Calibration { reason, kappa_curve }) => {
            write_text(&kappa_path, &kappa_csv(&kappa_curve))?;
            if !args.allow_identity {
                let tail: Vec<String> = kappa_curve.iter().rev().take(3).map(|(r, k)| format!("{r:.3}:{k:.4}")).collect();
                let err = Error::Calibration { reason, kappa_curve };
                return Err(anyhow::Error::new(err).context(format!(
                    "kappa curve written to {} (outermost r:kappa {})",
                    kappa_path.display(),
                    tail.join(" ")
                )));
            }
            log::warn!("calibration failed ({reason}); emitting identity parameters");
            CalibrationReport {
                params: FreqFilterParams::identity(args.transform),
                direction: args.direction,
                average: None,
                quantiles: None,
                fallback: true,
                failure: Some(reason),
            }
        }
        Err(e) => return Err(e.into()),
    };
    manifest.output(kappa_path);

    let params_path = args.out.join(PARAMS_FILE);
    report.params.save(&params_path)?;
    manifest.output(params_path);
    let report_path = args.out.join(REPORT_FILE);
    write_json(&report_path, &report)?;
    manifest.output(report_path);
    manifest.write(&args.out)?;
    Ok(report)
}
