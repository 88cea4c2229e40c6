//! Per-B-scan segmentation: binarization, denoising, topmost contours,
//! ellipse fitting and needle-pixel labeling.
//!
//! All image coordinates here are pixel indices `(ix, iz)`: `ix` the column
//! (lateral), `iz` the row (depth).

use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::volume::{BScan, ScanGeometry};

/// Outer diameter of the instrument the defaults are tuned for (30G needle).
pub const NEEDLE_DIAMETER_MM: f64 = 0.31;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    /// Foreground is `intensity > µ + k·σ`.
    pub k: f64,
    /// Half-width of the square median window (1 → 3×3).
    pub median_radius: usize,
    /// Half-width of the Gaussian window (2 → 5×5).
    pub gauss_radius: usize,
    pub gauss_sigma: f64,
    /// Ellipses are accepted as needle body when their minor axis
    /// (`2 · semi_minor`) is below this many pixels.
    pub m_e: f64,
    /// Major-axis bound as a multiple of `m_e`; rejects long shallow arcs.
    pub major_factor: f64,
    /// Smallest accepted semi-minor axis in pixels; rejects sliver fits to
    /// nearly straight contours.
    pub min_semi_minor: f64,
    /// Distance in pixels within which a foreground pixel belongs to an
    /// accepted ellipse.
    pub d_tol: f64,
    /// Largest depth jump in pixels between neighbouring columns of one
    /// contour group.
    pub max_contour_jump: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self::for_geometry(&ScanGeometry::default(), NEEDLE_DIAMETER_MM)
    }
}

impl SegmentationParams {
    /// Defaults with `m_e` set to 1.5 needle diameters at the lateral pitch
    /// of `geometry`.
    pub fn for_geometry(geometry: &ScanGeometry, needle_diameter_mm: f64) -> Self {
        SegmentationParams {
            k: 2.0,
            median_radius: 1,
            gauss_radius: 2,
            gauss_sigma: 1.0,
            m_e: 1.5 * needle_diameter_mm / geometry.pitch_x(),
            major_factor: 2.0,
            min_semi_minor: 3.0,
            d_tol: 2.0,
            max_contour_jump: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, ix: usize, iz: usize) -> bool {
        self.data[iz * self.width + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iz: usize, v: bool) {
        self.data[iz * self.width + ix] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// `µ + k·σ` over all pixels of the B-scan (population standard deviation).
pub fn adaptive_threshold_level(bscan: &BScan<'_>, k: f64) -> f64 {
    let n = bscan.data.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    // Integer accumulation keeps the statistics exact and order independent.
    let (sum, sum_sq) = bscan.data.iter().fold((0u64, 0u64), |(s, q), &v| {
        let v = v as u64;
        (s + v, q + v * v)
    });
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean * mean).max(0.0);
    mean + k * var.sqrt()
}

pub fn adaptive_threshold(bscan: &BScan<'_>, k: f64) -> Mask {
    let level = adaptive_threshold_level(bscan, k);
    Mask {
        width: bscan.width,
        height: bscan.height,
        data: bscan.data.iter().map(|&v| v as f64 > level).collect(),
    }
}

fn median_binary(mask: &Mask, radius: usize) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let r = radius as isize;
    let window = (2 * radius + 1) * (2 * radius + 1);
    // Horizontal then vertical box sums; pixels outside the image count as 0.
    let mut rows = vec![0u16; w * h];
    for iz in 0..h {
        for ix in 0..w {
            let lo = (ix as isize - r).max(0) as usize;
            let hi = ((ix as isize + r) as usize).min(w - 1);
            rows[iz * w + ix] = (lo..=hi).filter(|&j| mask.data[iz * w + j]).count() as u16;
        }
    }
    let mut out = Mask::new(w, h);
    for iz in 0..h {
        let lo = (iz as isize - r).max(0) as usize;
        let hi = ((iz as isize + r) as usize).min(h - 1);
        for ix in 0..w {
            let s: usize = (lo..=hi).map(|k| rows[k * w + ix] as usize).sum();
            out.data[iz * w + ix] = 2 * s > window;
        }
    }
    out
}

fn gaussian_rebinarize(mask: &Mask, radius: usize, sigma: f64) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let r = radius as isize;
    let mut kernel: Vec<f32> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
        .collect();
    let norm: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= norm);

    let mut tmp = vec![0f32; w * h];
    for iz in 0..h {
        for ix in 0..w {
            let mut acc = 0f32;
            for (t, kv) in kernel.iter().enumerate() {
                let j = ix as isize + t as isize - r;
                if j >= 0 && (j as usize) < w && mask.data[iz * w + j as usize] {
                    acc += kv;
                }
            }
            tmp[iz * w + ix] = acc;
        }
    }
    let mut out = Mask::new(w, h);
    for iz in 0..h {
        for ix in 0..w {
            let mut acc = 0f32;
            for (t, kv) in kernel.iter().enumerate() {
                let k = iz as isize + t as isize - r;
                if k >= 0 && (k as usize) < h {
                    acc += kv * tmp[k as usize * w + ix];
                }
            }
            out.data[iz * w + ix] = acc >= 0.5;
        }
    }
    out
}

/// Median filter followed by a Gaussian blur re-binarized at 0.5.
pub fn denoise(mask: &Mask, params: &SegmentationParams) -> Mask {
    if !mask.data.iter().any(|&b| b) {
        return mask.clone();
    }
    let m = median_binary(mask, params.median_radius);
    gaussian_rebinarize(&m, params.gauss_radius, params.gauss_sigma)
}

/// A laterally connected run of topmost-contour pixels, sorted by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourGroup {
    pub pixels: Vec<(usize, usize)>,
}

impl ContourGroup {
    pub fn column_range(&self) -> (usize, usize) {
        (
            self.pixels.first().map_or(0, |p| p.0),
            self.pixels.last().map_or(0, |p| p.0),
        )
    }
}

/// Scans columns left to right, taking the shallowest foreground pixel of
/// each. Neighbouring hits whose depths differ by at most `max_jump` pixels
/// join the same group.
pub fn extract_topmost_contours(mask: &Mask, max_jump: usize) -> Vec<ContourGroup> {
    let mut groups = Vec::new();
    let mut current: Vec<(usize, usize)> = Vec::new();
    for ix in 0..mask.width {
        let hit = (0..mask.height).find(|&iz| mask.get(ix, iz));
        match hit {
            Some(iz) => {
                if let Some(&(px, pz)) = current.last() {
                    if px + 1 != ix || pz.abs_diff(iz) > max_jump {
                        groups.push(ContourGroup {
                            pixels: std::mem::take(&mut current),
                        });
                    }
                }
                current.push((ix, iz));
            }
            None => {
                if !current.is_empty() {
                    groups.push(ContourGroup {
                        pixels: std::mem::take(&mut current),
                    });
                }
            }
        }
    }
    if !current.is_empty() {
        groups.push(ContourGroup { pixels: current });
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    pub center: Vector2<f64>,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the +ix axis, in (−π/2, π/2].
    pub tilt: f64,
}

impl EllipseParams {
    /// Euclidean distance from `p` to the ellipse curve.
    pub fn distance(&self, p: Vector2<f64>) -> f64 {
        let d = p - self.center;
        let (s, c) = self.tilt.sin_cos();
        let u = d.x * c + d.y * s;
        let v = -d.x * s + d.y * c;
        point_ellipse_distance(self.semi_major, self.semi_minor, u.abs(), v.abs())
    }
}

pub fn fit_ellipse(group: &ContourGroup) -> Result<EllipseParams> {
    let pts: Vec<[f64; 2]> = group.pixels.iter().map(|&(x, z)| [x as f64, z as f64]).collect();
    fit_ellipse_points(&pts)
}

/// Direct least-squares ellipse fit (algebraic distance, ellipse-specific
/// constraint `4AC − B² = 1`), solved in the numerically stable split form.
pub fn fit_ellipse_points(points: &[[f64; 2]]) -> Result<EllipseParams> {
    if points.len() < 5 {
        return Err(Error::TooFewPoints {
            needed: 5,
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
        return Err(Error::Degenerate("ellipse points coincide"));
    }

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let x = (p[0] - mx) / scale;
        let y = (p[1] - my) / scale;
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or(Error::Degenerate("ellipse points are collinear"))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the 3×3 constraint block.
    let reduced = Matrix3::from_rows(&[
        (m.row(2) / 2.0),
        (-m.row(1)),
        (m.row(0) / 2.0),
    ]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in reduced.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint <= 0.0 {
            continue;
        }
        let cost = (v.transpose() * m * v)[0] / constraint;
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, v));
        }
    }
    let (_, a1) = best.ok_or(Error::Degenerate("no elliptical solution"))?;
    let a2 = t * a1;
    let conic = [a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]];
    let mut e = conic_to_ellipse(&conic)?;
    e.center = Vector2::new(mx, my) + e.center * scale;
    e.semi_major *= scale;
    e.semi_minor *= scale;
    Ok(e)
}

/// Unit vector spanning the (numerical) null space of a rank-2 3×3 matrix.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|p, q| p.norm_squared().total_cmp(&q.norm_squared()))?;
    let norm = best.norm();
    (norm > 0.0 && norm.is_finite()).then(|| best / norm)
}

fn conic_to_ellipse(c: &[f64; 6]) -> Result<EllipseParams> {
    let [a, b, cc, d, e, f] = *c;
    let den = b * b - 4.0 * a * cc;
    if den >= 0.0 {
        return Err(Error::Degenerate("conic is not an ellipse"));
    }
    let x0 = (2.0 * cc * d - b * e) / den;
    let y0 = (2.0 * a * e - b * d) / den;
    let f0 = a * x0 * x0 + b * x0 * y0 + cc * y0 * y0 + d * x0 + e * y0 + f;
    let q = nalgebra::Matrix2::new(a, b / 2.0, b / 2.0, cc);
    let eig = q.symmetric_eigen();
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    let r0 = -f0 / l0;
    let r1 = -f0 / l1;
    if !(r0 > 0.0 && r1 > 0.0 && r0.is_finite() && r1.is_finite()) {
        return Err(Error::Degenerate("imaginary ellipse"));
    }
    let (major, minor, axis) = if r0 >= r1 {
        (r0.sqrt(), r1.sqrt(), eig.eigenvectors.column(0).into_owned())
    } else {
        (r1.sqrt(), r0.sqrt(), eig.eigenvectors.column(1).into_owned())
    };
    let mut tilt = axis.y.atan2(axis.x);
    if tilt <= -std::f64::consts::FRAC_PI_2 {
        tilt += std::f64::consts::PI;
    } else if tilt > std::f64::consts::FRAC_PI_2 {
        tilt -= std::f64::consts::PI;
    }
    Ok(EllipseParams {
        center: Vector2::new(x0, y0),
        semi_major: major,
        semi_minor: minor,
        tilt,
    })
}

/// Distance from `(u, v)` (first quadrant) to the axis-aligned ellipse with
/// semi-axes `a ≥ b`, by bisection on the Lagrange parameter.
fn point_ellipse_distance(a: f64, b: f64, u: f64, v: f64) -> f64 {
    if v > 0.0 {
        if u > 0.0 {
            let z0 = u / a;
            let z1 = v / b;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (a / b) * (a / b);
            let n0 = r0 * z0;
            let mut s0 = z1 - 1.0;
            let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
            let mut s = 0.0;
            for _ in 0..200 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let ratio0 = n0 / (s + r0);
                let ratio1 = z1 / (s + 1.0);
                let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if gs > 0.0 {
                    s0 = s;
                } else if gs < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x0 = r0 * u / (s + r0);
            let x1 = v / (s + 1.0);
            (x0 - u).hypot(x1 - v)
        } else {
            (v - b).abs()
        }
    } else {
        let numer = a * u;
        let denom = a * a - b * b;
        if numer < denom {
            let xde = numer / denom;
            let x0 = a * xde;
            let x1 = b * (1.0 - xde * xde).max(0.0).sqrt();
            (x0 - u).hypot(x1)
        } else {
            (u - a).abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBScan {
    /// Denoised foreground.
    pub foreground: Mask,
    /// Needle votes; always a subset of `foreground`.
    pub needle: Mask,
    /// Ellipses that passed the needle gate.
    pub ellipses: Vec<EllipseParams>,
}

impl LabeledBScan {
    pub fn empty(width: usize, height: usize) -> Self {
        LabeledBScan {
            foreground: Mask::new(width, height),
            needle: Mask::new(width, height),
            ellipses: Vec::new(),
        }
    }

    /// 0 = background, 128 = foreground, 255 = needle-labeled.
    pub fn to_gray(&self) -> Vec<u8> {
        self.foreground
            .data
            .iter()
            .zip(&self.needle.data)
            .map(|(&f, &n)| if n { 255 } else if f { 128 } else { 0 })
            .collect()
    }

    /// Writes the label image as a binary PGM.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("P5\n{} {}\n255\n", self.foreground.width, self.foreground.height).into_bytes();
        bytes.extend(self.to_gray());
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn accepts(e: &EllipseParams, params: &SegmentationParams) -> bool {
    2.0 * e.semi_minor < params.m_e
        && 2.0 * e.semi_major < params.major_factor * params.m_e
        && e.semi_minor >= params.min_semi_minor
}

/// Foreground mask only (threshold + denoise); what marker detection needs.
pub fn foreground(bscan: &BScan<'_>, params: &SegmentationParams) -> Mask {
    denoise(&adaptive_threshold(bscan, params.k), params)
}

/// Full needle labeling of one B-scan: threshold, denoise, topmost contours,
/// ellipse fit per group and the `m_e` gate. Foreground pixels within
/// `d_tol` of an accepted ellipse (inside its group's column span) vote for
/// the needle.
pub fn label_needle_pixels(bscan: &BScan<'_>, params: &SegmentationParams) -> LabeledBScan {
    let fg = foreground(bscan, params);
    if fg.count() == 0 {
        return LabeledBScan::empty(bscan.width, bscan.height);
    }
    let mut needle = Mask::new(fg.width, fg.height);
    let mut ellipses = Vec::new();
    for group in extract_topmost_contours(&fg, params.max_contour_jump) {
        let Ok(e) = fit_ellipse(&group) else {
            continue;
        };
        if !accepts(&e, params) {
            continue;
        }
        let (lo, hi) = group.column_range();
        let tol = params.d_tol.ceil() as usize;
        let lo = lo.saturating_sub(tol);
        let hi = (hi + tol).min(fg.width - 1);
        for iz in 0..fg.height {
            for ix in lo..=hi {
                if fg.get(ix, iz) && e.distance(Vector2::new(ix as f64, iz as f64)) <= params.d_tol {
                    needle.set(ix, iz, true);
                }
            }
        }
        ellipses.push(e);
    }
    LabeledBScan {
        foreground: fg,
        needle,
        ellipses,
    }
}
