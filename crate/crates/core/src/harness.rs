//! Experiment plumbing: synthetic datasets, per-pose detection over a
//! trajectory, hand-eye solving and the noise sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::distortion::GalvoParams;
use crate::error::{Error, Result};
use crate::pipeline::{detect_marker, detect_needle_tip, DetectionParams};
use crate::registration::{calib_error, solve_handeye_with, Correspondences, KalmanParams, Method, RigidTransform};
use crate::stats::ErrorReport;
use crate::synth::{
    make_trajectory, pose_seed, render_flat_pair, render_scene, scenes_for_trajectory, CalibrationSpec, GroundTruth,
    Scene, TrajectorySpec,
};
use crate::text::{fmt_f64, read_to_string, write_string};
use crate::volume::{load_volume, save_volume, ScanGeometry, Volume};

pub const SWEEP_SIGMAS: [f64; 11] = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0, 36.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Marker-free: needle segmentation, clustering and voting.
    #[default]
    Needle,
    /// Reference method: RANSAC sphere fit to a ball marker.
    Marker,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "needle" => Ok(Mode::Needle),
            "marker" => Ok(Mode::Marker),
            _ => Err(Error::InvalidParameter(format!("mode '{s}' (expected needle or marker)"))),
        }
    }
}

fn default_handeye_axis() -> [f64; 3] {
    [1.0, 2.0, 0.5]
}
fn default_handeye_angle() -> f64 {
    20.0
}
fn default_handeye_translation() -> [f64; 3] {
    [12.0, -3.5, 40.0]
}

/// Ground-truth camera → robot transform as axis, angle and translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandEyeSpec {
    #[serde(default = "default_handeye_axis")]
    pub axis: [f64; 3],
    #[serde(default = "default_handeye_angle")]
    pub angle_deg: f64,
    #[serde(default = "default_handeye_translation")]
    pub translation: [f64; 3],
}

impl Default for HandEyeSpec {
    fn default() -> Self {
        HandEyeSpec {
            axis: default_handeye_axis(),
            angle_deg: default_handeye_angle(),
            translation: default_handeye_translation(),
        }
    }
}

impl HandEyeSpec {
    pub fn transform(&self) -> RigidTransform {
        let [x, y, z] = self.axis;
        let [tx, ty, tz] = self.translation;
        RigidTransform::from_axis_angle(Vector3::new(x, y, z), self.angle_deg.to_radians(), Vector3::new(tx, ty, tz))
    }
}

fn default_seed() -> u64 {
    7
}
fn default_sigma() -> f64 {
    8.0
}
fn default_trajectory() -> TrajectorySpec {
    TrajectorySpec::traj1()
}

/// Everything needed to synthesize one trajectory dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub geometry: ScanGeometry,
    #[serde(default)]
    pub galvo: GalvoParams,
    #[serde(default)]
    pub hand_eye: HandEyeSpec,
    #[serde(default = "default_trajectory")]
    pub trajectory: TrajectorySpec,
    /// Scene at the first pose; a mode-specific default when absent.
    #[serde(default)]
    pub scene: Option<Scene>,
    /// Flat-surface volumes for galvo calibration are written when present.
    #[serde(default)]
    pub calibration: Option<CalibrationSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn base_scene(&self) -> Scene {
        self.scene.clone().unwrap_or_else(|| default_scene(self.mode))
    }
}

pub fn default_scene(mode: Mode) -> Scene {
    let tip = Vector3::new(1.5, 1.0, 1.1);
    match mode {
        Mode::Needle => Scene::needle_over_tissue(tip, 1.9),
        Mode::Marker => Scene::ball_marker(tip),
    }
}

/// Per-pose scenes, robot positions and ground truth of an experiment.
pub struct Plan {
    pub scenes: Vec<Scene>,
    pub robot: Vec<Vector3<f64>>,
    pub truth: GroundTruth,
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan> {
    let x = cfg.hand_eye.transform();
    let base = cfg.base_scene();
    let start = base
        .reference_point()
        .ok_or_else(|| Error::InvalidParameter("scene has neither needle nor ball".into()))?;
    let robot = make_trajectory(&cfg.trajectory, &x.apply(&start))?;
    let poses = scenes_for_trajectory(&base, &x, &robot);
    let cams: Vec<Vector3<f64>> = poses.iter().map(|p| p.1).collect();
    let truth = GroundTruth::new(&x, &cfg.galvo, cfg.noise_sigma, cfg.seed, &cams);
    let robot = truth.robot_tips.iter().map(|r| Vector3::new(r[0], r[1], r[2])).collect();
    Ok(Plan {
        scenes: poses.into_iter().map(|p| p.0).collect(),
        robot,
        truth,
    })
}

/// Renders pose `index` of a plan at noise level `sigma`. The seed depends on
/// the pose only, so sweeps over `sigma` share the same background speckle.
pub fn render_pose(cfg: &ExperimentConfig, plan: &Plan, index: usize, sigma: f64) -> Result<Volume> {
    render_scene(&plan.scenes[index], &cfg.geometry, &cfg.galvo, sigma, pose_seed(cfg.seed, index))
}

pub fn pose_volume_name(index: usize) -> String {
    format!("pose_{index:03}.hdr")
}

pub fn positions_csv(points: &[Vector3<f64>]) -> String {
    let mut s = String::from("index,x_mm,y_mm,z_mm\n");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", fmt_f64(p.x, 12), fmt_f64(p.y, 12), fmt_f64(p.z, 12));
    }
    s
}

pub fn parse_positions_csv(text: &str, path: &Path) -> Result<Vec<Vector3<f64>>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("index") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 4 {
            return Err(Error::format(path, format!("line {}: expected index,x,y,z", n + 1)));
        }
        let idx: usize = f[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad index", n + 1)))?;
        if idx != out.len() {
            return Err(Error::format(path, format!("line {}: poses out of order", n + 1)));
        }
        let v = |s: &str| crate::text::parse_f64(s, "coordinate", path);
        out.push(Vector3::new(v(f[1])?, v(f[2])?, v(f[3])?));
    }
    Ok(out)
}

/// Writes a dataset: one volume per pose under `volumes/`, `poses.csv`
/// (robot positions), `galvo.txt`, `ground_truth.toml`, `config.toml` and,
/// when configured, `flat_x.hdr` / `flat_y.hdr`.
pub fn write_dataset(cfg: &ExperimentConfig, dir: &Path) -> Result<Plan> {
    let plan = plan(cfg)?;
    let vol_dir = dir.join("volumes");
    std::fs::create_dir_all(&vol_dir).map_err(|e| Error::io(&vol_dir, e))?;
    for i in 0..plan.scenes.len() {
        let v = render_pose(cfg, &plan, i, cfg.noise_sigma)?;
        save_volume(&v, &vol_dir.join(pose_volume_name(i)))?;
    }
    write_string(&dir.join("poses.csv"), &positions_csv(&plan.robot))?;
    cfg.galvo.save(&dir.join("galvo.txt"))?;
    plan.truth.save(&dir.join("ground_truth.toml"))?;
    write_string(&dir.join("config.toml"), &cfg.to_toml())?;
    if let Some(cal) = &cfg.calibration {
        let (fx, fy) = render_flat_pair(cal, &cfg.galvo, cfg.seed)?;
        save_volume(&fx, &dir.join("flat_x.hdr"))?;
        save_volume(&fy, &dir.join("flat_y.hdr"))?;
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub mode: Mode,
    pub detection: DetectionParams,
    pub kalman: KalmanParams,
    pub galvo: GalvoParams,
    /// Drop poses whose detection failed instead of aborting.
    pub skip_failed: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Qkt,
            mode: Mode::Needle,
            detection: DetectionParams::default(),
            kalman: KalmanParams::default(),
            galvo: GalvoParams::default(),
            skip_failed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseResult {
    pub index: usize,
    /// Corrected camera-frame detection, or the failure message.
    pub detection: std::result::Result<Vector3<f64>, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRun {
    pub poses: Vec<PoseResult>,
    pub correspondences: Correspondences,
    /// Pose index of every correspondence pair.
    pub used: Vec<usize>,
    pub transform: RigidTransform,
    pub report: ErrorReport,
}

impl TrajectoryRun {
    pub fn mean_detection_seconds(&self) -> f64 {
        self.poses.iter().map(|p| p.seconds).sum::<f64>() / self.poses.len().max(1) as f64
    }

    /// `index,x_mm,y_mm,z_mm,status`, one row per pose.
    pub fn tips_csv(&self) -> String {
        let mut s = String::from("index,x_mm,y_mm,z_mm,status\n");
        for p in &self.poses {
            match &p.detection {
                Ok(v) => {
                    let _ = writeln!(s, "{},{},{},{},ok", p.index, fmt_f64(v.x, 12), fmt_f64(v.y, 12), fmt_f64(v.z, 12));
                }
                Err(e) => {
                    let _ = writeln!(s, "{},,,,\"{}\"", p.index, e.replace('"', "'"));
                }
            }
        }
        s
    }

    /// `transform.txt`, `errors.csv` and `tips.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.transform.save(&dir.join("transform.txt"))?;
        self.report.save_csv(&dir.join("errors.csv"))?;
        write_string(&dir.join("tips.csv"), &self.tips_csv())
    }
}

/// Detects the tracked point in one volume according to `cfg.mode`.
pub fn detect(volume: &Volume, cfg: &RunConfig) -> Result<Vector3<f64>> {
    match cfg.mode {
        Mode::Needle => detect_needle_tip(volume, &cfg.galvo, &cfg.detection).map(|d| d.tip.corrected),
        Mode::Marker => detect_marker(volume, &cfg.galvo, &cfg.detection).map(|d| d.corrected),
    }
}

/// Runs detection on every pose (`volume(i)` supplies pose `i`), pairs the
/// detections with the robot positions and solves the hand-eye transform.
pub fn run_trajectory(
    robot: &[Vector3<f64>],
    mut volume: impl FnMut(usize) -> Result<Volume>,
    cfg: &RunConfig,
) -> Result<TrajectoryRun> {
    cfg.kalman.validate()?;
    let mut poses = Vec::with_capacity(robot.len());
    let mut used = Vec::new();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, r) in robot.iter().enumerate() {
        let v = volume(i).map_err(|e| Error::Pose {
            index: i,
            source: Box::new(e),
        })?;
        let t0 = Instant::now();
        let det = detect(&v, cfg);
        let seconds = t0.elapsed().as_secs_f64();
        match det {
            Ok(p) => {
                used.push(i);
                a.push(*r);
                b.push(p);
                poses.push(PoseResult {
                    index: i,
                    detection: Ok(p),
                    seconds,
                });
            }
            Err(e) if cfg.skip_failed => poses.push(PoseResult {
                index: i,
                detection: Err(e.to_string()),
                seconds,
            }),
            Err(e) => {
                return Err(Error::Pose {
                    index: i,
                    source: Box::new(e),
                })
            }
        }
    }
    let correspondences = Correspondences::new(a, b)?;
    let transform = solve_handeye_with(&correspondences, cfg.method, &cfg.kalman)?;
    let report = calib_error(&correspondences, &transform)?;
    Ok(TrajectoryRun {
        poses,
        correspondences,
        used,
        transform,
        report,
    })
}

/// Runs over a dataset directory written by [`write_dataset`].
pub fn run_dataset(dir: &Path, cfg: &RunConfig) -> Result<TrajectoryRun> {
    let poses_path = dir.join("poses.csv");
    let robot = parse_positions_csv(&read_to_string(&poses_path)?, &poses_path)?;
    let vol_dir = dir.join("volumes");
    run_trajectory(&robot, |i| load_volume(&vol_dir.join(pose_volume_name(i))), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub sigma: f64,
    pub result: std::result::Result<ErrorReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepResult {
    pub entries: Vec<SweepEntry>,
}

impl NoiseSweepResult {
    pub fn mean(&self, sigma: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.sigma == sigma)
            .and_then(|e| e.result.as_ref().ok())
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sigma,n,mean_um,median_um,q1_um,q3_um,min_um,max_um,n_outliers,status\n");
        for e in &self.entries {
            match &e.result {
                Ok(r) => {
                    let f = |x: f64| fmt_f64(x, 6);
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},ok",
                        e.sigma,
                        r.errors.len(),
                        f(r.mean),
                        f(r.median),
                        f(r.q1),
                        f(r.q3),
                        f(r.min),
                        f(r.max),
                        r.outliers.len()
                    );
                }
                Err(msg) => {
                    let _ = writeln!(s, "{},0,,,,,,,,\"{}\"", e.sigma, msg.replace('"', "'"));
                }
            }
        }
        s
    }
}

/// Re-renders the experiment's trajectory at each noise level (same scenes
/// and seeds) and runs the pipeline on it. Failures are recorded per level.
pub fn noise_sweep(exp: &ExperimentConfig, cfg: &RunConfig, sigmas: &[f64]) -> Result<NoiseSweepResult> {
    let plan = plan(exp)?;
    let mut entries = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let run = run_trajectory(&plan.robot, |i| render_pose(exp, &plan, i, sigma), cfg);
        entries.push(SweepEntry {
            sigma,
            result: run.map(|r| r.report).map_err(|e| e.to_string()),
        });
    }
    Ok(NoiseSweepResult { entries })
}

/// Default output directory name for a run.
pub fn default_run_dir(dataset: &Path) -> PathBuf {
    dataset.join("run")
}
