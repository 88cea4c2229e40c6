//! Galvanometer fan distortion: calibration and point correction.
//!
//! Each scan mirror sweeps the beam in a fan. In the raw volume the lateral
//! coordinate encodes the beam angle and the axial coordinate encodes the path
//! length along the beam, so a flat surface shows up as an arc. For the X
//! mirror the model is
//!
//! ```text
//! θ  = (x − x_c) / z_xc          R = z + z_xc
//! x' = R · sin θ + x_c           z* = R · cos θ − z_xc
//! ```
//!
//! followed by the same unwarp for the Y mirror on `(y, z*)` with
//! `(y_c, z_yc)`, giving `(y', z')`. `(x_c, z_xc)` is the center of curvature
//! that a flat surface exhibits in raw B-scans (the quantity circle fitting
//! measures); the fan apex itself sits at depth `−z_xc`. The central column
//! `x = x_c` is left untouched and the map is the identity on it.
//!
//! [`distort_point`] is the exact analytic inverse and is what the
//! synthesizer uses to place corrected-space geometry into raw volumes.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::{adaptive_threshold, denoise, SegmentationParams};
use crate::text::{fmt_f64, parse_f64, read_to_string, write_string};
use crate::volume::{BScan, Volume};

/// Virtual pivot centers of the two scan mirrors, in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalvoParams {
    pub x_c: f64,
    pub z_xc: f64,
    pub y_c: f64,
    pub z_yc: f64,
}

impl Default for GalvoParams {
    /// Pivot centers measured on the reference scanner configuration
    /// (3.01 × 3.10 × 2.60 mm field).
    fn default() -> Self {
        GalvoParams {
            x_c: 1.489,
            z_xc: 151.563,
            y_c: 1.068,
            z_yc: 428.541,
        }
    }
}

impl GalvoParams {
    /// Pivots so far away that the correction is the identity to well below
    /// a micrometer over a few-millimeter field.
    pub fn near_identity(x_c: f64, y_c: f64) -> Self {
        GalvoParams {
            x_c,
            z_xc: 1e6,
            y_c,
            z_yc: 1e6,
        }
    }

    /// Pivot depths must lie beyond the axial extent so the map is injective
    /// over the field.
    pub fn validate(&self, axial_extent_mm: f64) -> Result<()> {
        let all = [self.x_c, self.z_xc, self.y_c, self.z_yc];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("galvo parameters must be finite".into()));
        }
        if self.z_xc.abs() <= axial_extent_mm || self.z_yc.abs() <= axial_extent_mm {
            return Err(Error::InvalidParameter(format!(
                "pivot depths ({}, {}) must exceed the axial extent {axial_extent_mm} mm",
                self.z_xc, self.z_yc
            )));
        }
        Ok(())
    }

    /// Two-line text form: a header naming the four values, then the values.
    pub fn to_text(&self) -> String {
        format!(
            "# virtual pivot centers (mm)\nx_c z_xc y_c z_yc\n{} {} {} {}\n",
            fmt_f64(self.x_c, 6),
            fmt_f64(self.z_xc, 6),
            fmt_f64(self.y_c, 6),
            fmt_f64(self.z_yc, 6)
        )
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty galvo file"))?
            .split_whitespace()
            .collect();
        if header != ["x_c", "z_xc", "y_c", "z_yc"] {
            return Err(Error::format(path, "expected header 'x_c z_xc y_c z_yc'"));
        }
        let values: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::format(path, "missing value line"))?
            .split_whitespace()
            .collect();
        if values.len() != 4 {
            return Err(Error::format(path, "expected four values"));
        }
        Ok(GalvoParams {
            x_c: parse_f64(values[0], "x_c", path)?,
            z_xc: parse_f64(values[1], "z_xc", path)?,
            y_c: parse_f64(values[2], "y_c", path)?,
            z_yc: parse_f64(values[3], "z_yc", path)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_to_string(path)?, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: Vector2<f64>,
    pub radius: f64,
    pub rms_residual: f64,
}

/// Algebraic least-squares circle `x² + y² + D·x + E·y + F = 0`.
///
/// Points are centered and scaled before solving so that long shallow arcs
/// (radius ≫ chord) stay well conditioned.
pub fn fit_circle(points: &[[f64; 2]]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let scale = (points
        .iter()
        .map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if scale == 0.0 {
        return Err(Error::Degenerate("all circle points coincide"));
    }
    let a = DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => (points[i][0] - mx) / scale,
        1 => (points[i][1] - my) / scale,
        _ => 1.0,
    });
    let b = DVector::from_fn(points.len(), |i, _| {
        let u = (points[i][0] - mx) / scale;
        let v = (points[i][1] - my) / scale;
        -(u * u + v * v)
    });
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-12 {
        return Err(Error::Degenerate("circle points are collinear"));
    }
    let sol = svd
        .solve(&b, smax * 1e-14)
        .map_err(|_| Error::Degenerate("circle normal system is singular"))?;
    let (d, e, f) = (sol[0], sol[1], sol[2]);
    let cu = -d / 2.0;
    let cv = -e / 2.0;
    let r2 = cu * cu + cv * cv - f;
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(Error::Degenerate("circle fit has no real radius"));
    }
    let center = Vector2::new(mx + cu * scale, my + cv * scale);
    let radius = r2.sqrt() * scale;
    let rms_residual = (points
        .iter()
        .map(|p| ((Vector2::new(p[0], p[1]) - center).norm() - radius).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(CircleFit {
        center,
        radius,
        rms_residual,
    })
}

/// For each column, the shallowest pixel with intensity `>= threshold`, as
/// `(lateral_mm, depth_mm)` of the pixel center. Columns without a hit are
/// skipped.
pub fn detect_top_surface(bscan: &BScan<'_>, threshold: u8) -> Vec<[f64; 2]> {
    (0..bscan.width)
        .filter_map(|ix| {
            (0..bscan.height)
                .find(|&iz| bscan.at(ix, iz) >= threshold)
                .map(|iz| bscan.pixel_mm(ix, iz))
        })
        .collect()
}

/// Surface depth per column of a flat-surface B-scan, as
/// `(lateral_mm, depth_mm)` of the first pixel above `µ + k·σ`.
///
/// The denoised foreground mask locates the surface and rejects isolated
/// speckle above it; the edge itself is then read from the raw threshold
/// within a couple of rows of the denoised edge, because the median filter
/// nibbles the corners of the staircase a shallow arc rasterizes into.
pub fn detect_surface(bscan: &BScan<'_>, k: f64) -> Vec<[f64; 2]> {
    const SEARCH: usize = 2;
    let params = SegmentationParams {
        k,
        ..SegmentationParams::default()
    };
    let raw = adaptive_threshold(bscan, k);
    let fg = denoise(&raw, &params);
    (0..fg.width)
        .filter_map(|ix| {
            let top = (0..fg.height).find(|&iz| fg.get(ix, iz))?;
            let lo = top.saturating_sub(SEARCH);
            let hi = (top + SEARCH).min(fg.height - 1);
            let iz = (lo..=hi).find(|&iz| raw.get(ix, iz)).unwrap_or(top);
            Some(bscan.pixel_mm(ix, iz))
        })
        .collect()
}

/// Common center of several arcs, each with its own radius.
///
/// An algebraic (Kåsa) solution `x² + y² + D·x + E·y + F_k = 0` with `D, E`
/// shared seeds a geometric refinement that minimizes orthogonal distances,
/// the per-arc radii being eliminated as mean distances. The refinement
/// matters for shallow arcs: depth noise enters the algebraic form through a
/// regressor that barely varies along the arc, which pulls the center towards
/// the arc by a few percent of the radius.
pub fn fit_concentric_circles(arcs: &[Vec<[f64; 2]>]) -> Result<Vector2<f64>> {
    let pts: Vec<&[f64; 2]> = arcs.iter().flatten().collect();
    let used: Vec<&Vec<[f64; 2]>> = arcs.iter().filter(|a| a.len() >= 3).collect();
    let n_used: usize = used.iter().map(|a| a.len()).sum();
    if n_used < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let scale = (pts.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum::<f64>() / n).sqrt();
    if scale == 0.0 {
        return Err(Error::Degenerate("all circle points coincide"));
    }
    let mut ata = nalgebra::Matrix2::<f64>::zeros();
    let mut atb = Vector2::<f64>::zeros();
    for arc in &used {
        let uvw: Vec<[f64; 3]> = arc
            .iter()
            .map(|p| {
                let u = (p[0] - mx) / scale;
                let v = (p[1] - my) / scale;
                [u, v, u * u + v * v]
            })
            .collect();
        let k = uvw.len() as f64;
        let mean = |i: usize| uvw.iter().map(|q| q[i]).sum::<f64>() / k;
        let (mu, mv, mw) = (mean(0), mean(1), mean(2));
        for q in &uvw {
            let r = Vector2::new(q[0] - mu, q[1] - mv);
            ata += r * r.transpose();
            atb -= r * (q[2] - mw);
        }
    }
    let svd = ata.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-14 {
        return Err(Error::Degenerate("arcs do not constrain a center"));
    }
    let de = svd
        .solve(&atb, 0.0)
        .map_err(|_| Error::Degenerate("concentric circle system is singular"))?;
    let mut c = Vector2::new(-de.x / 2.0, -de.y / 2.0);
    let scaled: Vec<Vec<Vector2<f64>>> = used
        .iter()
        .map(|a| a.iter().map(|p| Vector2::new((p[0] - mx) / scale, (p[1] - my) / scale)).collect())
        .collect();
    for _ in 0..50 {
        let mut jtj = nalgebra::Matrix2::<f64>::zeros();
        let mut jtr = Vector2::<f64>::zeros();
        for arc in &scaled {
            let d: Vec<f64> = arc.iter().map(|p| (p - c).norm()).collect();
            let g: Vec<Vector2<f64>> = arc.iter().zip(&d).map(|(p, di)| -(p - c) / *di).collect();
            let k = arc.len() as f64;
            let r = d.iter().sum::<f64>() / k;
            let gm = g.iter().sum::<Vector2<f64>>() / k;
            for (gi, di) in g.iter().zip(&d) {
                let j = gi - gm;
                jtj += j * j.transpose();
                jtr += j * (di - r);
            }
        }
        let Some(step) = jtj.try_inverse().map(|inv| -(inv * jtr)) else {
            break;
        };
        c += step;
        if step.norm() <= 1e-15 * c.norm().max(1.0) {
            break;
        }
    }
    if !(c.x.is_finite() && c.y.is_finite()) {
        return Err(Error::Degenerate("concentric circle refinement diverged"));
    }
    Ok(Vector2::new(mx + c.x * scale, my + c.y * scale))
}

/// Common arc center of all B-scans of a flat-surface volume, in the
/// volume's own (lateral, depth) coordinates.
fn pooled_arc_center(volume: &Volume, k: f64) -> Result<Vector2<f64>> {
    let mut arcs = Vec::with_capacity(volume.geometry().n_y);
    for (iy, bscan) in volume.bscans().enumerate() {
        let surface = detect_surface(&bscan, k);
        if surface.len() < 3 {
            return Err(Error::NoSurface(iy));
        }
        arcs.push(surface);
    }
    fit_concentric_circles(&arcs)
}

/// Estimates both pivot centers from two volumes of a flat reference surface.
///
/// `flat_x` is scanned with B-scans along x (the usual orientation);
/// `flat_y` is scanned with B-scans along y, i.e. its lateral axis is the
/// physical y axis and its B-scan index runs along x. `k` is the adaptive
/// threshold factor used to find the surface in every B-scan.
pub fn calibrate_galvo(flat_x: &Volume, flat_y: &Volume, k: f64) -> Result<GalvoParams> {
    let cx = pooled_arc_center(flat_x, k)?;
    let cy = pooled_arc_center(flat_y, k)?;
    Ok(GalvoParams {
        x_c: cx.x,
        z_xc: cx.y,
        y_c: cy.x,
        z_yc: cy.y,
    })
}

#[inline]
fn unwarp(lateral: f64, depth: f64, center: f64, pivot: f64) -> (f64, f64) {
    let angle = (lateral - center) / pivot;
    let radius = depth + pivot;
    let (s, c) = angle.sin_cos();
    (radius * s + center, radius * c - pivot)
}

#[inline]
fn warp(lateral: f64, depth: f64, center: f64, pivot: f64) -> Result<(f64, f64)> {
    let sign = pivot.signum();
    let u = sign * (lateral - center);
    let w = sign * (depth + pivot);
    if w <= 0.0 {
        return Err(Error::NotInvertible);
    }
    let angle = u.atan2(w);
    let radius = sign * u.hypot(w);
    Ok((center + pivot * angle, radius - pivot))
}

/// Maps a raw (distorted) position to metric corrected space: X mirror
/// unwarp first, then Y.
pub fn correct_point(p: &Vector3<f64>, g: &GalvoParams) -> Vector3<f64> {
    let (x, z_star) = unwarp(p.x, p.z, g.x_c, g.z_xc);
    let (y, z) = unwarp(p.y, z_star, g.y_c, g.z_yc);
    Vector3::new(x, y, z)
}

/// Exact inverse of [`correct_point`]: Y mirror first, then X.
pub fn distort_point(p: &Vector3<f64>, g: &GalvoParams) -> Result<Vector3<f64>> {
    let (y, z_star) = warp(p.y, p.z, g.y_c, g.z_yc)?;
    let (x, z) = warp(p.x, z_star, g.x_c, g.z_xc)?;
    Ok(Vector3::new(x, y, z))
}

/// Raw A-scan `(x, y)` as a ray in corrected space: `origin + depth · dir`
/// is `correct_point((x, y, depth))` for every depth (`dir` is unit length).
pub fn ascan_ray(x: f64, y: f64, g: &GalvoParams) -> (Vector3<f64>, Vector3<f64>) {
    let o = correct_point(&Vector3::new(x, y, 0.0), g);
    let theta = (x - g.x_c) / g.z_xc;
    let phi = (y - g.y_c) / g.z_yc;
    let dir = Vector3::new(theta.sin(), theta.cos() * phi.sin(), theta.cos() * phi.cos());
    (o, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> GalvoParams {
        GalvoParams::default()
    }

    #[test]
    fn circle_through_three_points() {
        let fit = fit_circle(&[[5.0, 0.0], [0.0, 5.0], [-5.0, 0.0]]).unwrap();
        assert!(fit.center.norm() < 1e-12);
        assert!((fit.radius - 5.0).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-12);
    }

    #[test]
    fn shallow_arc_center_recovered() {
        let (cx, cz, r) = (1.489, 151.563, 150.0);
        // 50 points over a 3 mm chord at the top of the circle.
        let pts: Vec<[f64; 2]> = (0..50)
            .map(|i| {
                let x = i as f64 * 3.0 / 49.0;
                let dx = x - cx;
                [x, cz - (r * r - dx * dx).sqrt()]
            })
            .collect();
        let fit = fit_circle(&pts).unwrap();
        assert!((fit.center.x - cx).abs() < 1e-9, "{}", fit.center.x - cx);
        assert!((fit.center.y - cz).abs() < 1e-9, "{}", fit.center.y - cz);
        assert!((fit.radius - r).abs() < 1e-9);
    }

    #[test]
    fn circle_errors() {
        assert!(matches!(
            fit_circle(&[[0.0, 0.0], [1.0, 1.0]]),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_circle(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]),
            Err(Error::Degenerate(_))
        ));
    }

    fn shallow_arcs(noise: f64, seed: u64) -> Vec<Vec<[f64; 2]>> {
        let (cx, cz) = (1.489, 151.563);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..16)
            .map(|k| {
                let r = 150.0 - 0.01 * k as f64;
                (0..200)
                    .map(|i| {
                        let x = i as f64 * 3.0 / 199.0;
                        let z = cz - (r * r - (x - cx).powi(2)).sqrt();
                        [x, z + noise * rng.random_range(-1.0..1.0)]
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn concentric_arcs_exact() {
        let c = fit_concentric_circles(&shallow_arcs(0.0, 1)).unwrap();
        assert!((c.x - 1.489).abs() < 1e-7, "{c:?}");
        assert!((c.y - 151.563).abs() < 1e-6, "{c:?}");
    }

    #[test]
    fn concentric_fit_is_not_pulled_by_depth_noise() {
        // ±0.6 µm uniform depth noise on a 7.5 µm sagitta: the algebraic
        // solution alone lands millimeters short of the center.
        let arcs = shallow_arcs(6e-4, 2);
        let c = fit_concentric_circles(&arcs).unwrap();
        assert!((c.y - 151.563).abs() < 1.0, "{c:?}");
        assert!((c.x - 1.489).abs() < 0.01, "{c:?}");
        let single = fit_circle(&arcs[0]).unwrap();
        assert!(single.center.y < 151.563 - 1.0, "{single:?}");
    }

    #[test]
    fn concentric_fit_errors() {
        assert!(matches!(fit_concentric_circles(&[]), Err(Error::TooFewPoints { .. })));
        let line = vec![vec![[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]];
        assert!(fit_concentric_circles(&line).is_err());
    }

    #[test]
    fn surface_of_bright_row() {
        let (w, h) = (8, 200);
        let mut img = vec![0u8; w * h];
        img[100 * w..101 * w].fill(200);
        img[150 * w..151 * w].fill(200);
        let b = BScan::new(w, h, &img, 0.01, 0.005);
        let pts = detect_top_surface(&b, 100);
        assert_eq!(pts.len(), w);
        assert!(pts.iter().all(|p| (p[1] - 100.5 * 0.005).abs() < 1e-12));
        let zeros = vec![0u8; w * h];
        assert!(detect_top_surface(&BScan::new(w, h, &zeros, 0.01, 0.005), 1).is_empty());
    }

    #[test]
    fn rasterized_arc_within_half_pitch() {
        let (w, h, px, pz) = (300, 400, 0.01, 0.005);
        let (cx, cz, r) = (1.5, 2.5, 2.0);
        let mut img = vec![0u8; w * h];
        for ix in 0..w {
            let x = (ix as f64 + 0.5) * px;
            let z = cz - (r * r - (x - cx).powi(2)).sqrt();
            let iz = (z / pz).floor() as usize;
            img[iz * w + ix] = 255;
        }
        let b = BScan::new(w, h, &img, px, pz);
        for p in detect_top_surface(&b, 128) {
            let z = cz - (r * r - (p[0] - cx).powi(2)).sqrt();
            assert!((p[1] - z).abs() <= pz / 2.0 + 1e-12);
        }
    }

    #[test]
    fn central_column_is_fixed() {
        let g = table();
        for &z in &[0.0, 0.7, 2.6] {
            let p = Vector3::new(g.x_c, g.y_c, z);
            assert!((correct_point(&p, &g) - p).norm() < 1e-12);
            assert!((distort_point(&p, &g).unwrap() - p).norm() < 1e-12);
        }
        // Off-center in y only: x stays fixed, and vice versa.
        let p = Vector3::new(g.x_c, 0.2, 1.0);
        assert!((correct_point(&p, &g).x - g.x_c).abs() < 1e-12);
        let q = Vector3::new(0.3, g.y_c, 1.0);
        assert!((correct_point(&q, &g).y - g.y_c).abs() < 1e-12);
    }

    #[test]
    fn reference_point_against_direct_evaluation() {
        // Independent evaluation, written out term by term.
        let g = table();
        let (x, y, z) = (3.0_f64, 1.068_f64, 0.0_f64);
        let theta = (x - 1.489) / 151.563;
        let rx = z + 151.563;
        let xe = rx * theta.sin() + 1.489;
        let zs = rx * theta.cos() - 151.563;
        let phi = (y - 1.068) / 428.541;
        let ry = zs + 428.541;
        let ye = ry * phi.sin() + 1.068;
        let ze = ry * phi.cos() - 428.541;
        let c = correct_point(&Vector3::new(x, y, z), &g);
        assert!((c - Vector3::new(xe, ye, ze)).norm() < 1e-12);
        // Several micrometers of axial shift at the field edge.
        let dz_um = (c.z - z) * 1e3;
        assert!(dz_um < -5.0 && dz_um > -10.0, "{dz_um}");
    }

    #[test]
    fn inverse_pair_on_random_points() {
        let g = table();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = Vector3::new(
                rng.random_range(0.0..3.01),
                rng.random_range(0.0..3.10),
                rng.random_range(0.0..2.60),
            );
            let c = correct_point(&q, &g);
            assert!((distort_point(&c, &g).unwrap() - q).norm() < 1e-9);
            let d = distort_point(&q, &g).unwrap();
            assert!((correct_point(&d, &g) - q).norm() < 1e-9);
        }
    }

    #[test]
    fn displacement_is_small_in_field() {
        let g = table();
        let mut worst: f64 = 0.0;
        for ix in 0..=20 {
            for iy in 0..=20 {
                for iz in 0..=10 {
                    let p = Vector3::new(3.01 * ix as f64 / 20.0, 3.10 * iy as f64 / 20.0, 2.60 * iz as f64 / 10.0);
                    worst = worst.max((correct_point(&p, &g) - p).norm());
                }
            }
        }
        assert!(worst < 0.050, "max displacement {worst} mm");
        assert!(worst > 0.005);
    }

    #[test]
    fn warped_plane_fits_pivot() {
        let g = table();
        let h = 1.3;
        // Raw arc of the plane z' = h in the B-scan through y = y_c.
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let x = 3.01 * i as f64 / 199.0;
                let corrected = Vector3::new(x, g.y_c, h);
                // Find the raw point along the A-scan whose corrected x is `x`.
                let raw = distort_point(&corrected, &g).unwrap();
                [raw.x, raw.z]
            })
            .collect();
        let fit = fit_circle(&pts).unwrap();
        assert!((fit.center.x - g.x_c).abs() < 0.01 * g.z_xc);
        assert!((fit.center.y - g.z_xc).abs() < 0.01 * g.z_xc, "{}", fit.center.y);
    }

    #[test]
    fn outside_invertible_region() {
        let g = table();
        assert!(matches!(
            distort_point(&Vector3::new(1.0, 1.0, -200.0), &g),
            Err(Error::NotInvertible)
        ));
    }

    #[test]
    fn ascan_is_a_straight_ray() {
        let g = table();
        let (x, y) = (0.2, 2.9);
        let (o, d) = ascan_ray(x, y, &g);
        assert!((d.norm() - 1.0).abs() < 1e-12);
        for &z in &[0.0, 0.5, 2.6] {
            let c = correct_point(&Vector3::new(x, y, z), &g);
            assert!((o + d * z - c).norm() < 1e-12);
        }
    }

    #[test]
    fn params_text_round_trip() {
        let g = table();
        let text = g.to_text();
        assert!(text.contains("x_c z_xc y_c z_yc"));
        assert!(text.contains("1.48900 151.563 1.06800 428.541"));
        assert_eq!(GalvoParams::from_text(&text, Path::new("g.txt")).unwrap(), g);
    }
}
