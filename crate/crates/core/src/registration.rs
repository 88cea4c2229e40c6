//! Rigid point-set registration for the hand-eye problem `A' = R·B + T`,
//! where `A'` are robot-frame tip positions and `B` the matching
//! camera-frame detections.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::stats::{report_stats, ErrorReport};
use crate::text::fmt_f64;

/// Singular values of the centred camera points below this (mm) count as
/// vanishing.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        RigidTransform {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Geodesic angle (rad) between the two rotations.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let d = self.rotation.transpose() * other.rotation;
        // Antisymmetric part is accurate for small angles where acos is not.
        let s = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]).norm() / 2.0;
        let c = (d.trace() - 1.0) / 2.0;
        s.atan2(c)
    }

    pub fn is_rotation(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).amax() < tol && (r.determinant() - 1.0).abs() < tol
    }

    /// Three lines of four numbers: the rows of `[R | T]`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..3 {
            let row: Vec<String> = (0..3)
                .map(|j| fmt_f64(self.rotation[(i, j)], 12))
                .chain(std::iter::once(fmt_f64(self.translation[i], 12)))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let nums: Vec<f64> = text
            .split_whitespace()
            .map(|t| crate::text::parse_f64(t, "matrix entry", path))
            .collect::<Result<_>>()?;
        if nums.len() != 12 {
            return Err(Error::format(path, format!("expected 12 numbers, found {}", nums.len())));
        }
        let mut r = Matrix3::zeros();
        let mut t = Vector3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r[(i, j)] = nums[4 * i + j];
            }
            t[i] = nums[4 * i + 3];
        }
        Ok(RigidTransform::new(r, t))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::text::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&crate::text::read_to_string(path)?, path)
    }
}

pub fn apply_transform(x: &RigidTransform, p: &Vector3<f64>) -> Vector3<f64> {
    x.apply(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correspondences {
    /// `A'`: robot frame, mm.
    pub robot: Vec<Vector3<f64>>,
    /// `B`: camera frame, mm.
    pub camera: Vec<Vector3<f64>>,
}

impl Correspondences {
    pub fn new(robot: Vec<Vector3<f64>>, camera: Vec<Vector3<f64>>) -> Result<Self> {
        if robot.len() != camera.len() {
            return Err(Error::LengthMismatch(robot.len(), camera.len()));
        }
        if robot.len() < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: robot.len(),
            });
        }
        Ok(Correspondences { robot, camera })
    }

    pub fn len(&self) -> usize {
        self.robot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robot.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.robot.len() != self.camera.len() {
            return Err(Error::LengthMismatch(self.robot.len(), self.camera.len()));
        }
        if self.robot.len() < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: self.robot.len(),
            });
        }
        Ok(())
    }
}

fn centroid(p: &[Vector3<f64>]) -> Vector3<f64> {
    p.iter().sum::<Vector3<f64>>() / p.len() as f64
}

/// Centroids and the cross-covariance `Σ (b − b̄)(a − ā)ᵀ`, after checking
/// that the camera points span more than a line.
fn centred(c: &Correspondences) -> Result<(Vector3<f64>, Vector3<f64>, Matrix3<f64>)> {
    c.check()?;
    let ca = centroid(&c.robot);
    let cb = centroid(&c.camera);
    let mut h = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (a, b) in c.robot.iter().zip(&c.camera) {
        let (da, db) = (a - ca, b - cb);
        h += db * da.transpose();
        scatter += db * db.transpose();
    }
    // Singular values of the n×3 centred matrix are the square roots of the
    // scatter eigenvalues.
    let mut sv: Vec<f64> = scatter
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    sv.sort_by(f64::total_cmp);
    if sv[1] < DEGENERACY_TOL {
        return Err(Error::Degenerate("camera points are collinear"));
    }
    Ok((ca, cb, h))
}

/// SVD-based least-squares rigid fit (Kabsch with reflection guard).
pub fn solve_svdt(c: &Correspondences) -> Result<RigidTransform> {
    let (ca, cb, h) = centred(c)?;
    let svd = h.svd(true, true);
    let u = svd.u.ok_or(Error::Degenerate("svd failed"))?;
    let v = svd.v_t.ok_or(Error::Degenerate("svd failed"))?.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    Ok(RigidTransform::new(r, ca - r * cb))
}

/// Rotation of the quaternion solver, canonicalized to a non-negative scalar
/// part.
pub fn qt_rotation(c: &Correspondences) -> Result<UnitQuaternion<f64>> {
    let (_, _, s) = centred(c)?;
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    #[rustfmt::skip]
    let n = Matrix4::new(
        sxx + syy + szz, syz - szy,       szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz, sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,       -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,       syz + szy,        -sxx - syy + szz,
    );
    let eig = n.symmetric_eigen();
    let imax = eig.eigenvalues.imax();
    let mut q = eig.eigenvectors.column(imax).into_owned();
    if q[0] < 0.0 {
        q = -q;
    }
    Ok(UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])))
}

/// Unit-quaternion least-squares rigid fit (largest eigenvector of the 4×4
/// profile matrix).
pub fn solve_qt(c: &Correspondences) -> Result<RigidTransform> {
    let q = qt_rotation(c)?;
    let r = *q.to_rotation_matrix().matrix();
    let ca = centroid(&c.robot);
    let cb = centroid(&c.camera);
    Ok(RigidTransform::new(r, ca - r * cb))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// Process noise variance per step, mm².
    pub q: f64,
    /// Measurement noise variance, mm².
    pub r: f64,
    /// Prior variance at initialization, mm².
    pub p0: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            q: 1e-6,
            r: 1e-4,
            p0: 1e6,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0 && self.r >= 0.0 && self.p0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kalman q={} r={} p0={}",
                self.q, self.r, self.p0
            )));
        }
        Ok(())
    }
}

/// Constant-position linear Kalman filter on a 3-D point. The axes are
/// independent, so the covariance stays diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrack {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub q: f64,
    pub r: f64,
}

impl KalmanTrack {
    /// Prior centred on the first measurement, then updated with it.
    pub fn new(first: Vector3<f64>, params: &KalmanParams) -> Self {
        let mut t = KalmanTrack {
            mean: first,
            covariance: Matrix3::identity() * params.p0,
            q: params.q,
            r: params.r,
        };
        t.update(&first);
        t
    }

    /// Time update; `u` is a known displacement since the last step.
    pub fn predict(&mut self, u: &Vector3<f64>) {
        self.mean += u;
        for i in 0..3 {
            self.covariance[(i, i)] += self.q;
        }
    }

    pub fn update(&mut self, z: &Vector3<f64>) {
        for i in 0..3 {
            let p = self.covariance[(i, i)];
            let s = p + self.r;
            let k = if s > 0.0 { p / s } else { 1.0 };
            self.mean[i] += k * (z[i] - self.mean[i]);
            self.covariance[(i, i)] = (1.0 - k) * p;
        }
    }
}

/// Filters a stationary-model track; returns one estimate per measurement.
pub fn kalman_filter_track(measurements: &[Vector3<f64>], q: f64, r: f64) -> Result<Vec<Vector3<f64>>> {
    let params = KalmanParams {
        q,
        r,
        ..KalmanParams::default()
    };
    kalman_filter_track_with_input(measurements, &vec![Vector3::zeros(); measurements.len()], &params)
}

/// Like [`kalman_filter_track`], with a known displacement `inputs[k]`
/// applied in the prediction step before measurement `k` (`inputs[0]` is
/// ignored).
pub fn kalman_filter_track_with_input(
    measurements: &[Vector3<f64>],
    inputs: &[Vector3<f64>],
    params: &KalmanParams,
) -> Result<Vec<Vector3<f64>>> {
    params.validate()?;
    let Some(first) = measurements.first() else {
        return Err(Error::Empty("measurement sequence"));
    };
    if inputs.len() != measurements.len() {
        return Err(Error::LengthMismatch(measurements.len(), inputs.len()));
    }
    let mut track = KalmanTrack::new(*first, params);
    let mut out = Vec::with_capacity(measurements.len());
    out.push(track.mean);
    for (z, u) in measurements.iter().zip(inputs).skip(1) {
        track.predict(u);
        track.update(z);
        out.push(track.mean);
    }
    Ok(out)
}

/// Quaternion solve on Kalman-filtered camera points. The commanded robot
/// steps, rotated into the camera frame by an initial quaternion solve, drive
/// the filter's prediction so the track follows the trajectory instead of
/// lagging behind it.
pub fn solve_qkt(c: &Correspondences, params: &KalmanParams) -> Result<RigidTransform> {
    let x0 = solve_qt(c)?;
    let rt = x0.rotation.transpose();
    let mut inputs = vec![Vector3::zeros(); c.len()];
    for k in 1..c.len() {
        inputs[k] = rt * (c.robot[k] - c.robot[k - 1]);
    }
    let filtered = kalman_filter_track_with_input(&c.camera, &inputs, params)?;
    solve_qt(&Correspondences {
        robot: c.robot.clone(),
        camera: filtered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Svdt,
    Qt,
    Qkt,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SVDT" => Ok(Method::Svdt),
            "QT" => Ok(Method::Qt),
            "QKT" => Ok(Method::Qkt),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Svdt => "SVDT",
            Method::Qt => "QT",
            Method::Qkt => "QKT",
        })
    }
}

/// Camera → robot transform by the chosen solver.
pub fn solve_handeye(c: &Correspondences, method: Method) -> Result<RigidTransform> {
    solve_handeye_with(c, method, &KalmanParams::default())
}

pub fn solve_handeye_with(c: &Correspondences, method: Method, kalman: &KalmanParams) -> Result<RigidTransform> {
    match method {
        Method::Svdt => solve_svdt(c),
        Method::Qt => solve_qt(c),
        Method::Qkt => solve_qkt(c, kalman),
    }
}

/// Per-pair residual `|A'_i − (R·B_i + T)|` in µm, summarized.
pub fn calib_error(c: &Correspondences, x: &RigidTransform) -> Result<ErrorReport> {
    if c.robot.len() != c.camera.len() {
        return Err(Error::LengthMismatch(c.robot.len(), c.camera.len()));
    }
    let e: Vec<f64> = c
        .robot
        .iter()
        .zip(&c.camera)
        .map(|(a, b)| (a - x.apply(b)).norm() * 1e3)
        .collect();
    report_stats(&e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn random_transform(rng: &mut impl Rng) -> RigidTransform {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        RigidTransform::from_axis_angle(
            axis,
            rng.random_range(-3.0..3.0),
            Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
        )
    }

    fn corr(x: &RigidTransform, cam: Vec<Vector3<f64>>) -> Correspondences {
        let robot = cam.iter().map(|b| x.apply(b)).collect();
        Correspondences::new(robot, cam).unwrap()
    }

    #[test]
    fn identity_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_points(&mut rng, 10);
        for solve in [solve_svdt, solve_qt] {
            let x = solve(&Correspondences::new(b.clone(), b.clone()).unwrap()).unwrap();
            assert!((x.rotation - Matrix3::identity()).amax() < 1e-12);
            assert!(x.translation.norm() < 1e-12);
            let t = Vector3::new(1.0, 2.0, 3.0);
            let a = b.iter().map(|p| p + t).collect();
            let x = solve(&Correspondences::new(a, b.clone()).unwrap()).unwrap();
            assert!((x.translation - t).norm() < 1e-12);
        }
    }

    #[test]
    fn recovers_random_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let gt = random_transform(&mut rng);
            let c = corr(&gt, random_points(&mut rng, 20));
            let s = solve_svdt(&c).unwrap();
            let q = solve_qt(&c).unwrap();
            for x in [s, q] {
                assert!(x.rotation_angle_to(&gt) < 1e-9);
                assert!((x.translation - gt.translation).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn reflection_guard() {
        // Planar points: the unguarded SVD solution may be a reflection.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = random_transform(&mut rng);
        let cam: Vec<Vector3<f64>> = (0..8)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0))
            .collect();
        let x = solve_svdt(&corr(&gt, cam)).unwrap();
        assert!(x.is_rotation(1e-9));
        assert!(x.rotation_angle_to(&gt) < 1e-9);
    }

    #[test]
    fn collinear_and_short_inputs_fail() {
        let line: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        let c = Correspondences::new(line.clone(), line).unwrap();
        assert!(matches!(solve_svdt(&c), Err(Error::Degenerate(_))));
        assert!(matches!(solve_qt(&c), Err(Error::Degenerate(_))));
        assert!(Correspondences::new(vec![Vector3::zeros(); 2], vec![Vector3::zeros(); 2]).is_err());
        assert!(matches!(
            Correspondences::new(vec![Vector3::zeros(); 3], vec![Vector3::zeros(); 4]),
            Err(Error::LengthMismatch(3, 4))
        ));
    }

    #[test]
    fn quaternion_scalar_part_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let gt = random_transform(&mut rng);
            let q = qt_rotation(&corr(&gt, random_points(&mut rng, 6))).unwrap();
            assert!(q.w >= 0.0);
        }
    }

    #[test]
    fn transform_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_transform(&mut rng);
        let back = RigidTransform::from_text(&x.to_text(), Path::new("t")).unwrap();
        assert_eq!(back, x);
        assert!(RigidTransform::from_text("1 2 3", Path::new("t")).is_err());
    }

    #[test]
    fn inverse_and_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = random_transform(&mut rng);
            let p = random_points(&mut rng, 1)[0] * 10.0;
            assert!((apply_transform(&x.inverse(), &apply_transform(&x, &p)) - p).norm() < 1e-12);
            let y = random_transform(&mut rng);
            assert!((x.compose(&y).apply(&p) - x.apply(&y.apply(&p))).norm() < 1e-12);
        }
        let t = RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(t.apply(&Vector3::zeros()), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn kalman_basic_cases() {
        let p = Vector3::new(0.3, -1.0, 2.0);
        let out = kalman_filter_track(&[p; 12], 1e-6, 1e-4).unwrap();
        assert!(out.iter().all(|o| (o - p).norm() < 1e-15));
        assert_eq!(kalman_filter_track(&[p], 1e-6, 1e-4).unwrap(), vec![p]);
        assert!(matches!(kalman_filter_track(&[], 1e-6, 1e-4), Err(Error::Empty(_))));
        assert!(kalman_filter_track(&[p], -1.0, 1e-4).is_err());
    }

    #[test]
    fn kalman_reduces_stationary_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let truth = Vector3::new(1.0, 1.0, 1.0);
        let z: Vec<Vector3<f64>> = (0..30)
            .map(|_| truth + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let f = kalman_filter_track(&z, 1e-8, 2.5e-5).unwrap();
        let rms = |v: &[Vector3<f64>]| (v.iter().map(|p| (p - truth).norm_squared()).sum::<f64>() / v.len() as f64).sqrt();
        assert!(rms(&f) < rms(&z));
    }

    #[test]
    fn kalman_with_input_follows_exact_track() {
        let z: Vec<Vector3<f64>> = (0..20).map(|k| Vector3::new(0.02 * k as f64, 0.0, 0.1)).collect();
        let mut u = vec![Vector3::zeros(); 20];
        for k in 1..20 {
            u[k] = z[k] - z[k - 1];
        }
        let f = kalman_filter_track_with_input(&z, &u, &KalmanParams::default()).unwrap();
        for (a, b) in f.iter().zip(&z) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn qkt_equals_qt_on_exact_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gt = random_transform(&mut rng);
        let robot: Vec<Vector3<f64>> = (0..31).map(|k| Vector3::new(0.02 * (k.min(10)) as f64, 0.02 * (k.clamp(10, 20) - 10) as f64, 0.02 * (k.max(20) - 20) as f64)).collect();
        let inv = gt.inverse();
        let cam = robot.iter().map(|a| inv.apply(a)).collect();
        let c = Correspondences::new(robot, cam).unwrap();
        let qt = solve_handeye(&c, Method::Qt).unwrap();
        let qkt = solve_handeye(&c, Method::Qkt).unwrap();
        assert!(qt.rotation_angle_to(&qkt) < 1e-6);
        assert!((qt.translation - qkt.translation).norm() < 1e-6);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("svdt".parse::<Method>().unwrap(), Method::Svdt);
        assert_eq!("QKT".parse::<Method>().unwrap(), Method::Qkt);
        assert!(matches!("ICP".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert_eq!(Method::Qt.to_string(), "QT");
    }

    #[test]
    fn calib_error_values() {
        let a = vec![Vector3::new(0.003, 0.004, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)];
        let b = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)];
        let r = calib_error(&Correspondences::new(a, b).unwrap(), &RigidTransform::identity()).unwrap();
        assert!((r.errors[0] - 5.0).abs() < 1e-9);
        assert_eq!(&r.errors[1..], &[0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn solvers_permutation_invariant(seed in 0u64..10_000, n in 3usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_transform(&mut rng);
            let cam = random_points(&mut rng, n);
            let noise = Normal::new(0.0, 0.01).unwrap();
            let robot: Vec<Vector3<f64>> = cam.iter().map(|b| gt.apply(b) + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))).collect();
            let c = Correspondences::new(robot.clone(), cam.clone()).unwrap();
            let perm: Vec<usize> = (0..n).rev().collect();
            let p = Correspondences::new(perm.iter().map(|&i| robot[i]).collect(), perm.iter().map(|&i| cam[i]).collect()).unwrap();
            for solve in [solve_svdt, solve_qt] {
                let (x, y) = (solve(&c).unwrap(), solve(&p).unwrap());
                prop_assert!(x.rotation_angle_to(&y) < 1e-9);
                prop_assert!((x.translation - y.translation).norm() < 1e-9);
                prop_assert!(x.is_rotation(1e-9));
            }
        }

        #[test]
        fn solvers_rotation_equivariant(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_transform(&mut rng);
            let s = random_transform(&mut rng);
            let cam = random_points(&mut rng, 8);
            let c = corr(&gt, cam.clone());
            let rotated = Correspondences::new(c.robot.clone(), cam.iter().map(|b| s.rotation * b).collect()).unwrap();
            for solve in [solve_svdt, solve_qt] {
                let x = solve(&c).unwrap();
                let y = solve(&rotated).unwrap();
                let expect = x.rotation * s.rotation.transpose();
                prop_assert!((y.rotation - expect).amax() < 1e-9);
            }
        }

        #[test]
        fn solvers_are_least_squares(seed in 0u64..10_000, n in 3usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_transform(&mut rng);
            let cam = random_points(&mut rng, n);
            let robot: Vec<Vector3<f64>> = cam.iter().map(|b| gt.apply(b) + Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05))).collect();
            let c = Correspondences::new(robot, cam).unwrap();
            let cost = |x: &RigidTransform| c.robot.iter().zip(&c.camera).map(|(a, b)| (a - x.apply(b)).norm_squared()).sum::<f64>();
            for solve in [solve_svdt, solve_qt] {
                let x = solve(&c).unwrap();
                let base = cost(&x);
                for _ in 0..10_000 {
                    let d = RigidTransform::from_axis_angle(
                        Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                        rng.random_range(-0.01..0.01),
                        Vector3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01)),
                    );
                    prop_assert!(base <= cost(&d.compose(&x)) + 1e-12);
                }
            }
        }
    }
}
