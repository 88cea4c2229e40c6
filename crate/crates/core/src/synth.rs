//! Synthetic OCT phantoms with ground truth.
//!
//! Scenes are described in corrected (metric) camera coordinates. Every raw
//! A-scan is a straight ray in that space (see [`ascan_ray`]), so rendering
//! casts one ray per raw column, finds the first surface it meets and paints
//! a bright band starting at the voxel nearest to the hit. Objects are opaque:
//! anything behind the first hit stays background unless the object has
//! interior scattering.

use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distortion::{ascan_ray, GalvoParams};
use crate::error::{Error, Result};
use crate::registration::RigidTransform;
use crate::volume::{ScanGeometry, Volume};

const BACKGROUND_STREAM: u64 = 0x6261_636b;
const NOISE_STREAM: u64 = 0x6e6f_6973;

fn default_needle_radius() -> f64 {
    0.155
}
fn default_needle_length() -> f64 {
    20.0
}
fn default_needle_reflectivity() -> f64 {
    100.0
}
fn default_ball_radius() -> f64 {
    0.25
}
fn default_ball_reflectivity() -> f64 {
    220.0
}
fn default_surface_reflectivity() -> f64 {
    120.0
}
fn default_attenuation() -> f64 {
    0.3
}
fn default_background() -> f64 {
    10.0
}
fn default_background_sigma() -> f64 {
    4.0
}
fn default_band() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeedleSpec {
    /// Geometric tip (centre of the tip face), mm.
    pub tip: [f64; 3],
    /// Direction from the tip towards the shaft; must have a positive y
    /// component. Normalized on use.
    pub axis: [f64; 3],
    #[serde(default = "default_needle_radius")]
    pub radius: f64,
    /// Shaft length behind the tip, mm.
    #[serde(default = "default_needle_length")]
    pub length: f64,
    /// Length of the invisible tip section, mm. The rendered needle starts
    /// this far behind `tip`.
    #[serde(default)]
    pub truncation: f64,
    #[serde(default = "default_needle_reflectivity")]
    pub reflectivity: f64,
    /// Reflectivity ramps up linearly over this distance from the rendered
    /// tip (0 = no ramp).
    #[serde(default)]
    pub tip_fade: f64,
    /// Relative reflectivity at the very tip when `tip_fade > 0`.
    #[serde(default)]
    pub tip_fade_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: [f64; 3],
    #[serde(default = "default_ball_radius")]
    pub radius: f64,
    #[serde(default = "default_ball_reflectivity")]
    pub reflectivity: f64,
}

/// Plane `z = depth + slope_x · x + slope_y · y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub depth: f64,
    #[serde(default)]
    pub slope_x: f64,
    #[serde(default)]
    pub slope_y: f64,
    #[serde(default = "default_surface_reflectivity")]
    pub reflectivity: f64,
    /// Interior scattering level relative to `reflectivity` (0 = dark).
    #[serde(default)]
    pub interior: f64,
    /// 1/e depth of the interior scattering, mm.
    #[serde(default = "default_attenuation")]
    pub attenuation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub needle: Option<NeedleSpec>,
    #[serde(default)]
    pub ball: Option<BallSpec>,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    #[serde(default = "default_background")]
    pub background: f64,
    #[serde(default = "default_background_sigma")]
    pub background_sigma: f64,
    /// Axial thickness of a rendered surface, voxels.
    #[serde(default = "default_band")]
    pub band_voxels: usize,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            needle: None,
            ball: None,
            surface: None,
            background: default_background(),
            background_sigma: default_background_sigma(),
            band_voxels: default_band(),
        }
    }
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl NeedleSpec {
    pub fn axis_unit(&self) -> Vector3<f64> {
        v3(self.axis).normalize()
    }

    /// The point ground truth refers to: the centre of the rendered tip face.
    pub fn visible_tip(&self) -> Vector3<f64> {
        v3(self.tip) + self.axis_unit() * self.truncation
    }
}

impl Scene {
    /// Needle at `tip` pointing along the default insertion direction
    /// (10° below the y axis) above a tissue plane.
    pub fn needle_over_tissue(tip: Vector3<f64>, tissue_depth: f64) -> Self {
        let a = 10f64.to_radians();
        Scene {
            needle: Some(NeedleSpec {
                tip: tip.into(),
                axis: [0.0, a.cos(), -a.sin()],
                radius: default_needle_radius(),
                length: default_needle_length(),
                truncation: 0.0,
                reflectivity: default_needle_reflectivity(),
                tip_fade: 0.0,
                tip_fade_floor: 0.0,
            }),
            surface: Some(SurfaceSpec {
                depth: tissue_depth,
                slope_x: 0.0,
                slope_y: 0.0,
                reflectivity: default_surface_reflectivity(),
                interior: 0.0,
                attenuation: default_attenuation(),
            }),
            ..Scene::default()
        }
    }

    /// Steel ball at `center` held by a short needle stub.
    pub fn ball_marker(center: Vector3<f64>) -> Self {
        let a = 10f64.to_radians();
        Scene {
            ball: Some(BallSpec {
                center: center.into(),
                radius: default_ball_radius(),
                reflectivity: default_ball_reflectivity(),
            }),
            needle: Some(NeedleSpec {
                tip: center.into(),
                axis: [0.0, a.cos(), -a.sin()],
                radius: default_needle_radius(),
                length: 0.5,
                truncation: 0.0,
                reflectivity: default_needle_reflectivity(),
                tip_fade: 0.0,
                tip_fade_floor: 0.0,
            }),
            ..Scene::default()
        }
    }

    /// The instrument (needle and ball) moved by `d` mm; the tissue stays.
    pub fn translated(&self, d: &Vector3<f64>) -> Scene {
        let mut s = self.clone();
        if let Some(n) = s.needle.as_mut() {
            n.tip = (v3(n.tip) + d).into();
        }
        if let Some(b) = s.ball.as_mut() {
            b.center = (v3(b.center) + d).into();
        }
        s
    }

    /// Reference point tracked across poses: the ball centre when a ball is
    /// present, else the visible needle tip.
    pub fn reference_point(&self) -> Option<Vector3<f64>> {
        self.ball
            .as_ref()
            .map(|b| v3(b.center))
            .or_else(|| self.needle.as_ref().map(NeedleSpec::visible_tip))
    }

    pub fn validate(&self, geom: &ScanGeometry) -> Result<()> {
        let e = geom.extent();
        let inside = |p: Vector3<f64>| (0..3).all(|i| p[i] >= 0.0 && p[i] <= e[i]);
        if let Some(n) = &self.needle {
            let a = v3(n.axis);
            if !(a.norm() > 0.0) || a.y <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "needle axis {:?} must have a positive y component",
                    n.axis
                )));
            }
            if !(n.radius > 0.0 && n.length > 0.0 && n.truncation >= 0.0 && n.truncation < n.length) {
                return Err(Error::InvalidGeometry("needle radius/length/truncation".into()));
            }
            if !inside(n.visible_tip()) {
                return Err(Error::InvalidGeometry(format!("needle tip {:?} outside the field", n.tip)));
            }
        }
        if let Some(b) = &self.ball {
            if !(b.radius > 0.0) || !inside(v3(b.center)) {
                return Err(Error::InvalidGeometry(format!("ball at {:?} outside the field", b.center)));
            }
        }
        if let Some(s) = &self.surface {
            if !(s.depth > 0.0 && s.depth < e.z) {
                return Err(Error::InvalidGeometry(format!("surface depth {} outside the field", s.depth)));
            }
        }
        if !(self.background_sigma >= 0.0) || self.band_voxels == 0 {
            return Err(Error::InvalidGeometry("background sigma / band".into()));
        }
        Ok(())
    }
}

/// First ray parameter `t ≥ 0` at which `o + t·d` meets an object, with the
/// reflectivity there and the interior profile behind it.
struct Hit {
    t: f64,
    reflectivity: f64,
    interior: f64,
    attenuation: f64,
}

fn hit_plane(s: &SurfaceSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let den = d.z - s.slope_x * d.x - s.slope_y * d.y;
    if den.abs() < 1e-12 {
        return None;
    }
    let t = (s.depth + s.slope_x * o.x + s.slope_y * o.y - o.z) / den;
    (t >= 0.0).then_some(Hit {
        t,
        reflectivity: s.reflectivity,
        interior: s.interior,
        attenuation: s.attenuation,
    })
}

fn hit_sphere(b: &BallSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let w = o - v3(b.center);
    let half_b = w.dot(d);
    let c = w.norm_squared() - b.radius * b.radius;
    let disc = half_b * half_b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -half_b - disc.sqrt();
    (t >= 0.0).then_some(Hit {
        t,
        reflectivity: b.reflectivity,
        interior: 0.0,
        attenuation: 1.0,
    })
}

fn hit_cylinder(n: &NeedleSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let a = n.axis_unit();
    let p0 = n.visible_tip();
    let len = n.length - n.truncation;
    let w = o - p0;
    let (wa, da) = (w.dot(&a), d.dot(&a));
    let wp = w - a * wa;
    let dp = d - a * da;
    let r2 = n.radius * n.radius;
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |t: f64, s: f64| {
        if t >= 0.0 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, s));
        }
    };
    let qa = dp.norm_squared();
    if qa > 1e-15 {
        let qb = wp.dot(&dp);
        let qc = wp.norm_squared() - r2;
        let disc = qb * qb - qa * qc;
        if disc >= 0.0 {
            let t = (-qb - disc.sqrt()) / qa;
            let s = wa + t * da;
            if (0.0..=len).contains(&s) {
                consider(t, s);
            }
        }
    }
    if da.abs() > 1e-15 {
        for s_cap in [0.0, len] {
            let t = (s_cap - wa) / da;
            if (wp + dp * t).norm_squared() <= r2 {
                consider(t, s_cap);
            }
        }
    }
    let (t, s) = best?;
    let mut refl = n.reflectivity;
    if n.tip_fade > 0.0 {
        let f = (s / n.tip_fade).clamp(0.0, 1.0);
        refl *= n.tip_fade_floor + (1.0 - n.tip_fade_floor) * f;
    }
    Some(Hit {
        t,
        reflectivity: refl,
        interior: 0.0,
        attenuation: 1.0,
    })
}

fn first_hit(scene: &Scene, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let candidates = [
        scene.needle.as_ref().and_then(|n| hit_cylinder(n, o, d)),
        scene.ball.as_ref().and_then(|b| hit_sphere(b, o, d)),
        scene.surface.as_ref().and_then(|s| hit_plane(s, o, d)),
    ];
    for h in candidates.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| h.t < b.t) {
            best = Some(h);
        }
    }
    best
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn bscan_rng(seed: u64, purpose: u64, iy: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.rotate_left(32));
    rng.set_stream(iy as u64);
    rng
}

/// Which physical axis the lateral (fast) index of the volume samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// B-scans along x, stacked along y (the normal acquisition).
    BscanX,
    /// B-scans along y, stacked along x (the second flat-surface scan used
    /// for galvo calibration).
    BscanY,
}

/// Renders `scene` into a raw volume warped by `galvo`, without extra
/// noise. Background speckle is seeded by `seed`.
pub fn render_clean(
    scene: &Scene,
    geom: &ScanGeometry,
    galvo: &GalvoParams,
    orientation: Orientation,
    seed: u64,
) -> Result<Volume> {
    geom.validate()?;
    let phys = match orientation {
        Orientation::BscanX => *geom,
        Orientation::BscanY => ScanGeometry::new(
            [geom.extent_y_mm, geom.extent_x_mm, geom.extent_z_mm],
            [geom.n_y, geom.n_x, geom.n_z],
        )?,
    };
    scene.validate(&phys)?;
    let bg = Normal::new(0.0, scene.background_sigma.max(0.0))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut voxels = vec![0u8; geom.voxel_count()];
    let slab = geom.bscan_len();
    let pz = geom.pitch_z();
    for (iy, bscan) in voxels.chunks_mut(slab).enumerate() {
        let mut rng = bscan_rng(seed, BACKGROUND_STREAM, iy);
        for v in bscan.iter_mut() {
            let n = if scene.background_sigma > 0.0 { bg.sample(&mut rng) } else { 0.0 };
            *v = clamp_u8(scene.background + n);
        }
        for ix in 0..geom.n_x {
            let lateral = (ix as f64 + 0.5) * geom.pitch_x();
            let slow = (iy as f64 + 0.5) * geom.pitch_y();
            let (x, y) = match orientation {
                Orientation::BscanX => (lateral, slow),
                Orientation::BscanY => (slow, lateral),
            };
            let (o, d) = ascan_ray(x, y, galvo);
            let Some(hit) = first_hit(scene, &o, &d) else { continue };
            let start = (hit.t / pz - 0.5).round();
            if start < 0.0 || start >= geom.n_z as f64 {
                continue;
            }
            let start = start as usize;
            let band_end = (start + scene.band_voxels).min(geom.n_z);
            for iz in start..band_end {
                bscan[iz * geom.n_x + ix] = clamp_u8(hit.reflectivity);
            }
            if hit.interior > 0.0 {
                let level = hit.reflectivity * hit.interior;
                for iz in band_end..geom.n_z {
                    let depth = (iz as f64 + 0.5) * pz - hit.t;
                    let v = level * (-depth / hit.attenuation).exp();
                    if v < 0.5 {
                        break;
                    }
                    let cell = &mut bscan[iz * geom.n_x + ix];
                    *cell = clamp_u8(*cell as f64 + v);
                }
            }
        }
    }
    Volume::new(*geom, voxels)
}

/// Adds independent zero-mean Gaussian noise of standard deviation `sigma`
/// to every voxel, rounding and clamping to `[0, 255]`. Each B-scan draws
/// from its own seeded stream.
pub fn add_noise(volume: Volume, sigma: f64, seed: u64) -> Result<Volume> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(volume);
    }
    let geom = *volume.geometry();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut voxels = volume.into_voxels();
    for (iy, bscan) in voxels.chunks_mut(geom.bscan_len().max(1)).enumerate() {
        let mut rng = bscan_rng(seed, NOISE_STREAM, iy);
        for v in bscan.iter_mut() {
            *v = clamp_u8(*v as f64 + normal.sample(&mut rng));
        }
    }
    Volume::new(geom, voxels)
}

/// Renders a B-scan-along-x volume and adds noise.
pub fn render_scene(
    scene: &Scene,
    geom: &ScanGeometry,
    galvo: &GalvoParams,
    noise_sigma: f64,
    seed: u64,
) -> Result<Volume> {
    let v = render_clean(scene, geom, galvo, Orientation::BscanX, seed)?;
    add_noise(v, noise_sigma, seed)
}

fn default_cal_extent() -> [f64; 3] {
    [3.01, 3.10, 2.60]
}
fn default_cal_lateral() -> usize {
    512
}
fn default_cal_slow() -> usize {
    64
}
fn default_cal_axial() -> usize {
    4096
}
fn default_cal_depth() -> f64 {
    1.3
}
// Steps the surface by about 3.62 axial voxels per B-scan at the default
// sampling; the golden-ratio fraction spreads the quantization phase evenly.
fn default_cal_slope() -> f64 {
    0.04741
}

/// Flat reference surface scanned twice for galvo calibration, once with
/// B-scans along x and once along y. The plane is tilted along the slow
/// axis only, so every B-scan still images a straight line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    /// Physical x, y, z extents, mm.
    #[serde(default = "default_cal_extent")]
    pub extent_mm: [f64; 3],
    #[serde(default = "default_cal_lateral")]
    pub n_lateral: usize,
    #[serde(default = "default_cal_slow")]
    pub n_slow: usize,
    #[serde(default = "default_cal_axial")]
    pub n_z: usize,
    #[serde(default = "default_cal_depth")]
    pub depth: f64,
    #[serde(default = "default_cal_slope")]
    pub slope: f64,
    #[serde(default = "default_surface_reflectivity")]
    pub reflectivity: f64,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// Renders the two flat-surface calibration volumes `(flat_x, flat_y)`.
pub fn render_flat_pair(spec: &CalibrationSpec, galvo: &GalvoParams, seed: u64) -> Result<(Volume, Volume)> {
    let [ex, ey, ez] = spec.extent_mm;
    let surface = |slope_x: f64, slope_y: f64| Scene {
        surface: Some(SurfaceSpec {
            depth: spec.depth,
            slope_x,
            slope_y,
            reflectivity: spec.reflectivity,
            interior: 0.0,
            attenuation: default_attenuation(),
        }),
        ..Scene::default()
    };
    let gx = ScanGeometry::new([ex, ey, ez], [spec.n_lateral, spec.n_slow, spec.n_z])?;
    let gy = ScanGeometry::new([ey, ex, ez], [spec.n_lateral, spec.n_slow, spec.n_z])?;
    let fx = render_clean(&surface(0.0, spec.slope), &gx, galvo, Orientation::BscanX, seed)?;
    let fy = render_clean(&surface(spec.slope, 0.0), &gy, galvo, Orientation::BscanY, seed ^ 1)?;
    Ok((
        add_noise(fx, spec.noise_sigma, seed)?,
        add_noise(fy, spec.noise_sigma, seed ^ 1)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// `steps` moves along each axis in turn.
    Traj1,
    /// Two rounds of half-length legs.
    Traj2,
    /// Explicit offsets from the start position.
    Custom,
}

fn default_step_um() -> f64 {
    20.0
}
fn default_axis_order() -> String {
    "XZY".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub pattern: Pattern,
    #[serde(default = "default_step_um")]
    pub step_um: f64,
    /// Steps per leg; defaults to 10 for traj1 and 5 for traj2.
    #[serde(default)]
    pub steps_per_leg: Option<usize>,
    #[serde(default = "default_axis_order")]
    pub axis_order: String,
    /// Offsets (mm) for the custom pattern; the first pose is the start.
    #[serde(default)]
    pub offsets: Vec<[f64; 3]>,
}

impl TrajectorySpec {
    pub fn traj1() -> Self {
        TrajectorySpec {
            pattern: Pattern::Traj1,
            step_um: default_step_um(),
            steps_per_leg: None,
            axis_order: default_axis_order(),
            offsets: Vec::new(),
        }
    }

    pub fn traj2() -> Self {
        TrajectorySpec {
            pattern: Pattern::Traj2,
            ..Self::traj1()
        }
    }
}

/// Robot-frame positions (mm) visited by the trajectory, starting at `start`.
pub fn make_trajectory(spec: &TrajectorySpec, start: &Vector3<f64>) -> Result<Vec<Vector3<f64>>> {
    if spec.pattern == Pattern::Custom {
        if spec.offsets.is_empty() {
            return Err(Error::InvalidParameter("custom trajectory without offsets".into()));
        }
        return Ok(spec.offsets.iter().map(|o| start + v3(*o)).collect());
    }
    if !(spec.step_um > 0.0 && spec.step_um.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {} µm", spec.step_um)));
    }
    let axes: Vec<usize> = spec
        .axis_order
        .chars()
        .map(|c| match c.to_ascii_uppercase() {
            'X' => Ok(0),
            'Y' => Ok(1),
            'Z' => Ok(2),
            _ => Err(Error::InvalidParameter(format!("axis order '{}'", spec.axis_order))),
        })
        .collect::<Result<_>>()?;
    if axes.is_empty() {
        return Err(Error::InvalidParameter("empty axis order".into()));
    }
    let (legs, rounds) = match spec.pattern {
        Pattern::Traj1 => (spec.steps_per_leg.unwrap_or(10), 1),
        Pattern::Traj2 => (spec.steps_per_leg.unwrap_or(5), 2),
        Pattern::Custom => unreachable!(),
    };
    let step = spec.step_um * 1e-3;
    let mut counts = [0usize; 3];
    let mut out = vec![*start];
    for _ in 0..rounds {
        for &a in &axes {
            for _ in 0..legs {
                counts[a] += 1;
                // Positions from step counts, so no rounding drift accumulates.
                let p = start + Vector3::new(counts[0] as f64, counts[1] as f64, counts[2] as f64) * step;
                out.push(p);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Camera → robot transform rows `[R | T]`.
    pub transform: [[f64; 4]; 3],
    pub galvo: [f64; 4],
    pub noise_sigma: f64,
    pub seed: u64,
    /// Tracked reference point per pose, camera frame (mm).
    pub camera_tips: Vec<[f64; 3]>,
    /// Same points in the robot frame.
    pub robot_tips: Vec<[f64; 3]>,
}

impl GroundTruth {
    pub fn new(
        x: &RigidTransform,
        galvo: &GalvoParams,
        noise_sigma: f64,
        seed: u64,
        camera_tips: &[Vector3<f64>],
    ) -> Self {
        let mut transform = [[0.0; 4]; 3];
        for (i, row) in transform.iter_mut().enumerate() {
            for j in 0..3 {
                row[j] = x.rotation[(i, j)];
            }
            row[3] = x.translation[i];
        }
        GroundTruth {
            transform,
            galvo: [galvo.x_c, galvo.z_xc, galvo.y_c, galvo.z_yc],
            noise_sigma,
            seed,
            camera_tips: camera_tips.iter().map(|&p| p.into()).collect(),
            robot_tips: camera_tips.iter().map(|p| x.apply(p).into()).collect(),
        }
    }

    pub fn rigid_transform(&self) -> RigidTransform {
        let t = &self.transform;
        RigidTransform::new(
            nalgebra::Matrix3::new(t[0][0], t[0][1], t[0][2], t[1][0], t[1][1], t[1][2], t[2][0], t[2][1], t[2][2]),
            Vector3::new(t[0][3], t[1][3], t[2][3]),
        )
    }

    pub fn galvo_params(&self) -> GalvoParams {
        GalvoParams {
            x_c: self.galvo[0],
            z_xc: self.galvo[1],
            y_c: self.galvo[2],
            z_yc: self.galvo[3],
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ground truth is always serializable")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::text::write_string(path, &self.to_toml())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::text::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Camera-frame poses of `base` that realize the robot trajectory under the
/// hand-eye transform `x`: the robot only translates, so the camera-frame
/// displacement is `Rᵀ · Δrobot`.
pub fn scenes_for_trajectory(
    base: &Scene,
    x: &RigidTransform,
    robot_positions: &[Vector3<f64>],
) -> Vec<(Scene, Vector3<f64>)> {
    let Some(first) = robot_positions.first() else {
        return Vec::new();
    };
    let rt = x.rotation.transpose();
    robot_positions
        .iter()
        .map(|p| {
            let d = rt * (p - first);
            let s = base.translated(&d);
            let r = s.reference_point().unwrap_or_else(Vector3::zeros);
            (s, r)
        })
        .collect()
}

/// Mixes a base seed and a pose index into an independent per-pose seed.
pub fn pose_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
