use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use octcal::cloud::RansacParams;
use octcal::distortion::{calibrate_galvo, GalvoParams};
use octcal::harness::{
    default_run_dir, noise_sweep, run_dataset, write_dataset, ExperimentConfig, Mode, RunConfig, SWEEP_SIGMAS,
};
use octcal::pipeline::{detect_marker, detect_needle_tip, DetectionParams};
use octcal::registration::{KalmanParams, Method};
use octcal::segmentation::{label_needle_pixels, SegmentationParams, NEEDLE_DIAMETER_MM};
use octcal::stats::{report_stats, ErrorReport};
use octcal::text::{fmt_f64, read_to_string, write_string};
use octcal::volume::{load_volume, ScanGeometry};
use octcal::{Error, Result};

#[derive(Parser)]
#[command(name = "octcal", version, about = "Marker-free OCT hand-eye calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic trajectory dataset from an experiment config.
    Synth {
        /// Experiment config (TOML); defaults are used for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's noise level.
        #[arg(long)]
        sigma: Option<f64>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate galvo pivot centres from two flat-surface volumes.
    CalibrateGalvo {
        #[arg(long)]
        flat_x: PathBuf,
        #[arg(long)]
        flat_y: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect the needle tip (or marker centre) in one volume.
    DetectTip {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Galvo params file; built-in defaults when omitted.
        #[arg(long)]
        galvo: Option<PathBuf>,
        #[arg(long, default_value = "needle")]
        mode: Mode,
        /// Also write the labeled point cloud.
        #[arg(long)]
        cloud: Option<PathBuf>,
        /// Also write per-B-scan label images (PGM) into this directory.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        det: DetectionArgs,
    },
    /// Detect every pose of a dataset, solve the hand-eye transform and
    /// report the calibration error.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "QKT")]
        method: Method,
        #[arg(long, default_value = "needle")]
        mode: Mode,
        /// Galvo params file; defaults to the dataset's galvo.txt.
        #[arg(long)]
        galvo: Option<PathBuf>,
        /// Estimate galvo params from the dataset's flat_x/flat_y volumes.
        #[arg(long, conflicts_with = "galvo")]
        calibrate: bool,
        /// Exclude poses whose detection fails instead of aborting.
        #[arg(long)]
        skip_failed: bool,
        #[command(flatten)]
        det: DetectionArgs,
        #[command(flatten)]
        kalman: KalmanArgs,
    },
    /// Re-run a synthetic experiment at σ = 0, 4, …, 40 and tabulate errors.
    NoiseSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "QKT")]
        method: Method,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long)]
        skip_failed: bool,
        #[command(flatten)]
        det: DetectionArgs,
        #[command(flatten)]
        kalman: KalmanArgs,
    },
    /// Summarize an errors CSV.
    Stats {
        #[arg(long)]
        errors: PathBuf,
    },
}

#[derive(Args, Clone)]
struct DetectionArgs {
    /// Adaptive threshold factor (µ + k·σ).
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    /// Ellipse minor-axis gate in pixels; 1.5 needle diameters by default.
    #[arg(long)]
    m_e: Option<f64>,
    /// Voxel-grid leaf size, mm.
    #[arg(long, default_value_t = 0.02)]
    leaf: f64,
    /// Cluster distance threshold, mm.
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    /// Pixel distance for needle labeling around an accepted ellipse.
    #[arg(long, default_value_t = 2.0)]
    d_tol: f64,
    /// Take the tip at the highest B-scan index.
    #[arg(long)]
    reverse_scan: bool,
    /// Marker radius, mm.
    #[arg(long, default_value_t = 0.25)]
    ball_radius: f64,
    /// RANSAC seed.
    #[arg(long, default_value_t = RansacParams::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = RansacParams::default().iterations)]
    ransac_iters: usize,
}

impl DetectionArgs {
    fn params(&self, geometry: &ScanGeometry) -> DetectionParams {
        let mut seg = SegmentationParams::for_geometry(geometry, NEEDLE_DIAMETER_MM);
        seg.k = self.k;
        seg.d_tol = self.d_tol;
        if let Some(m) = self.m_e {
            seg.m_e = m;
        }
        DetectionParams {
            segmentation: seg,
            leaf: self.leaf,
            cluster_t: self.t,
            reverse_scan: self.reverse_scan,
            ransac: RansacParams {
                seed: self.seed,
                iterations: self.ransac_iters,
                ..RansacParams::default()
            },
            ball_radius: self.ball_radius,
        }
    }
}

#[derive(Args, Clone)]
struct KalmanArgs {
    /// Kalman process noise, mm².
    #[arg(long, default_value_t = KalmanParams::default().q)]
    q: f64,
    /// Kalman measurement noise, mm².
    #[arg(long, default_value_t = KalmanParams::default().r)]
    r: f64,
}

impl KalmanArgs {
    fn params(&self) -> KalmanParams {
        KalmanParams {
            q: self.q,
            r: self.r,
            ..KalmanParams::default()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            out,
            sigma,
            seed,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = sigma {
                cfg.noise_sigma = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let plan = write_dataset(&cfg, &out)?;
            println!("wrote {} poses to {}", plan.scenes.len(), out.display());
        }
        Command::CalibrateGalvo { flat_x, flat_y, k, out } => {
            let g = calibrate_galvo(&load_volume(&flat_x)?, &load_volume(&flat_y)?, k)?;
            g.save(&out)?;
            print!("{}", g.to_text());
        }
        Command::DetectTip {
            volume,
            out,
            galvo,
            mode,
            cloud,
            labels,
            det,
        } => {
            let v = load_volume(&volume)?;
            let galvo = match galvo {
                Some(p) => GalvoParams::load(&p)?,
                None => GalvoParams::default(),
            };
            let params = det.params(v.geometry());
            let (tip, raw) = match mode {
                Mode::Needle => {
                    let d = detect_needle_tip(&v, &galvo, &params)?;
                    if let Some(p) = &cloud {
                        d.cloud.save(p)?;
                    }
                    (d.tip.corrected, d.tip.raw)
                }
                Mode::Marker => {
                    let d = detect_marker(&v, &galvo, &params)?;
                    if let Some(p) = &cloud {
                        d.cloud.save(p)?;
                    }
                    (d.corrected, d.fit.center)
                }
            };
            if let Some(dir) = &labels {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                for (iy, b) in v.bscans().enumerate() {
                    label_needle_pixels(&b, &params.segmentation).write_pgm(&dir.join(format!("bscan_{iy:03}.pgm")))?;
                }
            }
            let f = |x: f64| fmt_f64(x, 12);
            let csv = format!(
                "x_mm,y_mm,z_mm,raw_x_mm,raw_y_mm,raw_z_mm\n{},{},{},{},{},{}\n",
                f(tip.x),
                f(tip.y),
                f(tip.z),
                f(raw.x),
                f(raw.y),
                f(raw.z)
            );
            write_string(&out, &csv)?;
            print!("{csv}");
        }
        Command::Run {
            dataset,
            out,
            method,
            mode,
            galvo,
            calibrate,
            skip_failed,
            det,
            kalman,
        } => {
            let galvo = if calibrate {
                let g = calibrate_galvo(
                    &load_volume(&dataset.join("flat_x.hdr"))?,
                    &load_volume(&dataset.join("flat_y.hdr"))?,
                    det.k,
                )?;
                eprintln!("calibrated galvo: {}", g.to_text().lines().nth(1).unwrap_or(""));
                g
            } else {
                GalvoParams::load(&galvo.unwrap_or_else(|| dataset.join("galvo.txt")))?
            };
            let geometry = load_volume(&dataset.join("volumes").join(octcal::harness::pose_volume_name(0)))?
                .geometry()
                .to_owned();
            let cfg = RunConfig {
                method,
                mode,
                detection: det.params(&geometry),
                kalman: kalman.params(),
                galvo,
                skip_failed,
            };
            let run = run_dataset(&dataset, &cfg)?;
            let out = out.unwrap_or_else(|| default_run_dir(&dataset));
            run.write(&out)?;
            print!("{}", run.report.summary());
            for p in &run.poses {
                if let Err(e) = &p.detection {
                    eprintln!("pose {} skipped: {e}", p.index);
                }
            }
            eprintln!("mean detection time: {:.3} s/volume", run.mean_detection_seconds());
        }
        Command::NoiseSweep {
            config,
            out,
            method,
            sigmas,
            skip_failed,
            det,
            kalman,
        } => {
            let exp = load_config(config.as_deref())?;
            let cfg = RunConfig {
                method,
                mode: exp.mode,
                detection: det.params(&exp.geometry),
                kalman: kalman.params(),
                galvo: exp.galvo,
                skip_failed,
            };
            let sigmas = sigmas.unwrap_or_else(|| SWEEP_SIGMAS.to_vec());
            let result = noise_sweep(&exp, &cfg, &sigmas)?;
            let csv = result.to_csv();
            write_string(&out, &csv)?;
            print!("{csv}");
        }
        Command::Stats { errors } => {
            let e = ErrorReport::errors_from_csv(&read_to_string(&errors)?, &errors)?;
            print!("{}", report_stats(&e)?.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
