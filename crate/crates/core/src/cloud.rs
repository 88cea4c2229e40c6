//! Point clouds built from labeled volumes: downsampling, Euclidean
//! clustering, needle-cluster voting, tip location and the sphere fit used
//! for marker detection.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix4, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distortion::{correct_point, GalvoParams};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::segmentation::{LabeledBScan, Mask};
use crate::volume::{ScanGeometry, Volume};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    /// Raw (uncorrected) scanner coordinates in mm.
    pub p: Vector3<f64>,
    /// Needle vote from 2-D segmentation.
    pub b: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.points.iter().map(|c| c.p).collect()
    }

    pub fn votes(&self) -> usize {
        self.points.iter().filter(|c| c.b).count()
    }

    /// One `x_mm y_mm z_mm b` line per point.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 40);
        for c in &self.points {
            s.push_str(&format!("{:.6} {:.6} {:.6} {}\n", c.p.x, c.p.y, c.p.z, u8::from(c.b)));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::text::write_string(path, &self.to_text())
    }
}

/// Collects foreground voxels (per-B-scan masks in `labels`) as points at
/// their voxel centres, then merges points sharing a cubic cell of edge
/// `leaf` mm into their centroid. A merged point carries a needle vote if
/// any of its members did. `leaf <= 0` disables merging. Output is sorted by
/// cell index, so it does not depend on traversal order.
pub fn volume_to_cloud(volume: &Volume, labels: &[LabeledBScan], leaf: f64) -> Result<PointCloud> {
    let g = volume.geometry();
    if labels.len() != g.n_y {
        return Err(Error::LengthMismatch(labels.len(), g.n_y));
    }
    let masks: Vec<(&Mask, &Mask)> = labels.iter().map(|l| (&l.foreground, &l.needle)).collect();
    masks_to_cloud(g, &masks, leaf)
}

pub fn masks_to_cloud(g: &ScanGeometry, masks: &[(&Mask, &Mask)], leaf: f64) -> Result<PointCloud> {
    let mut b = CloudBuilder::new(*g);
    for (iy, (fg, needle)) in masks.iter().enumerate() {
        b.add_bscan(iy, fg, needle)?;
    }
    b.finish(leaf)
}

/// Accumulates foreground points one B-scan at a time, so a whole volume of
/// masks never has to be held in memory.
pub struct CloudBuilder {
    geometry: ScanGeometry,
    raw: Vec<CloudPoint>,
}

impl CloudBuilder {
    pub fn new(geometry: ScanGeometry) -> Self {
        CloudBuilder {
            geometry,
            raw: Vec::new(),
        }
    }

    pub fn add_bscan(&mut self, iy: usize, fg: &Mask, needle: &Mask) -> Result<()> {
        let g = &self.geometry;
        if fg.width != g.n_x || fg.height != g.n_z || needle.data.len() != fg.data.len() {
            return Err(Error::SizeMismatch {
                expected: g.bscan_len(),
                actual: fg.data.len(),
            });
        }
        for (ix, iz) in fg.iter_set() {
            self.raw.push(CloudPoint {
                p: g.center_mm(ix, iy, iz),
                b: needle.get(ix, iz),
            });
        }
        Ok(())
    }

    pub fn finish(self, leaf: f64) -> Result<PointCloud> {
        voxel_filter(self.raw, leaf)
    }
}

fn voxel_filter(mut raw: Vec<CloudPoint>, leaf: f64) -> Result<PointCloud> {
    if !(leaf.is_finite()) {
        return Err(Error::InvalidParameter(format!("leaf size {leaf}")));
    }
    if leaf <= 0.0 {
        raw.sort_by(|a, b| {
            (a.p.x, a.p.y, a.p.z)
                .partial_cmp(&(b.p.x, b.p.y, b.p.z))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        return Ok(PointCloud { points: raw });
    }
    let mut cells: HashMap<[i64; 3], (Vector3<f64>, usize, bool)> = HashMap::new();
    for c in &raw {
        let key = [
            (c.p.x / leaf).floor() as i64,
            (c.p.y / leaf).floor() as i64,
            (c.p.z / leaf).floor() as i64,
        ];
        let e = cells.entry(key).or_insert((Vector3::zeros(), 0, false));
        e.0 += c.p;
        e.1 += 1;
        e.2 |= c.b;
    }
    let mut keyed: Vec<([i64; 3], CloudPoint)> = cells
        .into_iter()
        .map(|(k, (sum, n, b))| (k, CloudPoint { p: sum / n as f64, b }))
        .collect();
    keyed.sort_unstable_by_key(|(k, _)| *k);
    Ok(PointCloud {
        points: keyed.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Voxel-grid filter on an existing cloud (see [`volume_to_cloud`]).
pub fn downsample(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    voxel_filter(cloud.points.clone(), leaf)
}

/// Connected components under the relation "distance < `t`". Each cluster
/// lists point indices in ascending order; clusters are ordered by their
/// smallest index. Every point belongs to exactly one cluster.
pub fn cluster_euclidean(cloud: &PointCloud, t: f64) -> Vec<Vec<usize>> {
    let pos = cloud.positions();
    let tree = KdTree::build(&pos);
    let mut label = vec![usize::MAX; pos.len()];
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..pos.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![seed];
        label[seed] = id;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            tree.for_each_within(&pos[i], t, |j| {
                if label[j] == usize::MAX {
                    label[j] = id;
                    members.push(j);
                    stack.push(j);
                }
            });
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// Picks the cluster with the most needle votes; on a tie the earlier
/// cluster wins.
pub fn segment_needle<'c>(cloud: &PointCloud, clusters: &'c [Vec<usize>]) -> Result<&'c [usize]> {
    if cloud.is_empty() || clusters.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let mut best = 0;
    let mut best_votes = 0;
    for (i, c) in clusters.iter().enumerate() {
        let votes = c.iter().filter(|&&k| cloud.points[k].b).count();
        if votes > best_votes {
            best_votes = votes;
            best = i;
        }
    }
    if best_votes == 0 {
        return Err(Error::NoNeedleEvidence);
    }
    Ok(&clusters[best])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipDetection {
    /// Centroid of the tip slice in raw scanner coordinates.
    pub raw: Vector3<f64>,
    /// `raw` after galvo distortion correction.
    pub corrected: Vector3<f64>,
    pub slice: usize,
    pub n_points: usize,
}

/// Tip = centroid of the needle points in the extreme B-scan slice: the
/// lowest slice index (the needle enters from larger y), or the highest when
/// `reverse` is set.
pub fn locate_tip(
    cloud: &PointCloud,
    needle: &[usize],
    geometry: &ScanGeometry,
    galvo: &GalvoParams,
    reverse: bool,
) -> Result<TipDetection> {
    if needle.is_empty() {
        return Err(Error::Empty("needle cluster"));
    }
    let slices: Vec<usize> = needle.iter().map(|&i| geometry.slice_of(cloud.points[i].p.y)).collect();
    let target = if reverse {
        *slices.iter().max().unwrap()
    } else {
        *slices.iter().min().unwrap()
    };
    let mut sum = Vector3::zeros();
    let mut n = 0;
    for (&i, &s) in needle.iter().zip(&slices) {
        if s == target {
            sum += cloud.points[i].p;
            n += 1;
        }
    }
    let raw = sum / n as f64;
    Ok(TipDetection {
        raw,
        corrected: correct_point(&raw, galvo),
        slice: target,
        n_points: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Inlier band half-width in mm.
    pub inlier_tol: f64,
    /// Candidate radii must lie within this fraction of the hint.
    pub radius_tol: f64,
    /// Minimum inlier fraction of the cloud.
    pub min_support: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 500,
            inlier_tol: 0.015,
            radius_tol: 0.2,
            min_support: 0.25,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereFit {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub inliers: Vec<usize>,
}

/// Sphere through four points, `None` if they are (nearly) coplanar.
fn sphere_from_four(p: [&Vector3<f64>; 4]) -> Option<(Vector3<f64>, f64)> {
    // |x|² + D x + E y + F z + G = 0, shifted to p[0] for conditioning.
    let o = p[0];
    let mut a = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    for (r, q) in p.iter().enumerate() {
        let d = *q - o;
        a[(r, 0)] = d.x;
        a[(r, 1)] = d.y;
        a[(r, 2)] = d.z;
        a[(r, 3)] = 1.0;
        rhs[r] = -d.norm_squared();
    }
    let sol = a.lu().solve(&rhs)?;
    let c = Vector3::new(-sol[0] / 2.0, -sol[1] / 2.0, -sol[2] / 2.0);
    let r2 = c.norm_squared() - sol[3];
    (r2 > 0.0 && r2.is_finite()).then(|| (c + o, r2.sqrt()))
}

/// Algebraic least-squares sphere through `pts`.
fn sphere_lsq(pts: &[Vector3<f64>]) -> Option<(Vector3<f64>, f64)> {
    let n = pts.len() as f64;
    let o = pts.iter().sum::<Vector3<f64>>() / n;
    let mut ata = Matrix4::zeros();
    let mut atb = Vector4::zeros();
    for q in pts {
        let d = q - o;
        let row = Vector4::new(d.x, d.y, d.z, 1.0);
        ata += row * row.transpose();
        atb += row * (-d.norm_squared());
    }
    let sol = ata.cholesky()?.solve(&atb);
    let c = Vector3::new(-sol[0] / 2.0, -sol[1] / 2.0, -sol[2] / 2.0);
    let r2 = c.norm_squared() - sol[3];
    (r2 > 0.0).then(|| (c + o, r2.sqrt()))
}

/// Gauss-Newton on the geometric residuals `|p − c| − r`.
fn sphere_refine(pts: &[Vector3<f64>], mut c: Vector3<f64>, mut r: f64) -> (Vector3<f64>, f64) {
    for _ in 0..20 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for q in pts {
            let d = q - c;
            let dist = d.norm();
            if dist == 0.0 {
                continue;
            }
            let u = d / dist;
            let j = Vector4::new(-u.x, -u.y, -u.z, -1.0);
            let res = dist - r;
            jtj += j * j.transpose();
            jtr += j * res;
        }
        let Some(ch) = jtj.cholesky() else { break };
        let step = ch.solve(&(-jtr));
        c += Vector3::new(step[0], step[1], step[2]);
        r += step[3];
        if step.norm() < 1e-12 {
            break;
        }
    }
    (c, r)
}

/// RANSAC sphere detection with a radius prior, followed by least-squares
/// refinement on the consensus set.
pub fn fit_sphere_ransac(points: &[Vector3<f64>], radius_hint: f64, params: &RansacParams) -> Result<SphereFit> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    if !(radius_hint > 0.0) {
        return Err(Error::InvalidParameter(format!("radius hint {radius_hint}")));
    }
    let min_support = ((params.min_support * points.len() as f64).ceil() as usize).max(4);
    let in_range = |r: f64| (r - radius_hint).abs() <= params.radius_tol * radius_hint;
    let count_inliers = |c: &Vector3<f64>, r: f64| {
        points
            .iter()
            .filter(|q| ((*q - c).norm() - r).abs() <= params.inlier_tol)
            .count()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Vector3<f64>, f64)> = None;
    for _ in 0..params.iterations {
        let idx = rand::seq::index::sample(&mut rng, points.len(), 4);
        let sample = [&points[idx.index(0)], &points[idx.index(1)], &points[idx.index(2)], &points[idx.index(3)]];
        let Some((c, r)) = sphere_from_four(sample) else { continue };
        if !in_range(r) {
            continue;
        }
        let n = count_inliers(&c, r);
        if best.as_ref().is_none_or(|b| n > b.0) {
            best = Some((n, c, r));
        }
    }
    let Some((n, c, r)) = best else {
        return Err(Error::NoConsensus(min_support));
    };
    if n < min_support {
        return Err(Error::NoConsensus(min_support));
    }

    let select = |c: &Vector3<f64>, r: f64| -> Vec<usize> {
        (0..points.len())
            .filter(|&i| ((points[i] - c).norm() - r).abs() <= params.inlier_tol)
            .collect()
    };
    let (mut c, mut r) = (c, r);
    let mut inliers = select(&c, r);
    for _ in 0..3 {
        let sub: Vec<Vector3<f64>> = inliers.iter().map(|&i| points[i]).collect();
        let (c0, r0) = sphere_lsq(&sub).unwrap_or((c, r));
        let (c1, r1) = sphere_refine(&sub, c0, r0);
        if !in_range(r1) {
            break;
        }
        let next = select(&c1, r1);
        if next.len() < min_support {
            break;
        }
        c = c1;
        r = r1;
        if next == inliers {
            break;
        }
        inliers = next;
    }
    Ok(SphereFit {
        center: c,
        radius: r,
        inliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn pc(pts: &[[f64; 3]], votes: &[bool]) -> PointCloud {
        PointCloud {
            points: pts
                .iter()
                .zip(votes)
                .map(|(p, &b)| CloudPoint {
                    p: Vector3::new(p[0], p[1], p[2]),
                    b,
                })
                .collect(),
        }
    }

    fn union_find_clusters(pos: &[Vector3<f64>], t: f64) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..pos.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            let mut i = i;
            while p[i] != r {
                let n = p[i];
                p[i] = r;
                i = n;
            }
            r
        }
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                if (pos[i] - pos[j]).norm() < t {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..pos.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    #[test]
    fn separated_and_chained_clusters() {
        let cloud = pc(&[[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [1.0, 0.0, 0.0]], &[false; 3]);
        assert_eq!(cluster_euclidean(&cloud, 0.1), vec![vec![0, 1], vec![2]]);

        let chain: Vec<[f64; 3]> = (0..10).map(|i| [0.09 * i as f64, 0.0, 0.0]).collect();
        let cloud = pc(&chain, &[false; 10]);
        assert_eq!(cluster_euclidean(&cloud, 0.1).len(), 1);
        // Distance equal to t does not connect.
        let cloud = pc(&[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]], &[false; 2]);
        assert_eq!(cluster_euclidean(&cloud, 0.5).len(), 2);
        assert!(cluster_euclidean(&PointCloud::default(), 0.1).is_empty());
    }

    proptest! {
        #[test]
        fn clustering_matches_union_find(
            raw in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..0.3f64), 0..120),
            t in 0.02..0.3f64,
        ) {
            let pts: Vec<[f64; 3]> = raw.iter().map(|&(x, y, z)| [x, y, z]).collect();
            let cloud = pc(&pts, &vec![false; pts.len()]);
            let got = cluster_euclidean(&cloud, t);
            prop_assert_eq!(&got, &union_find_clusters(&cloud.positions(), t));
            let mut all: Vec<usize> = got.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..pts.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn voting_picks_most_votes_first_on_tie() {
        let cloud = pc(
            &[[0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]],
            &[true, false, true, true, false, true],
        );
        let clusters = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
        assert_eq!(segment_needle(&cloud, &clusters).unwrap(), &[2, 3]);
        let clusters = vec![vec![0, 1], vec![4, 5]];
        assert_eq!(segment_needle(&cloud, &clusters).unwrap(), &[0, 1]);
        let quiet = pc(&[[0.0; 3], [0.0; 3]], &[false, false]);
        assert!(matches!(
            segment_needle(&quiet, &[vec![0], vec![1]]),
            Err(Error::NoNeedleEvidence)
        ));
        assert!(matches!(segment_needle(&PointCloud::default(), &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn tip_is_centroid_of_lowest_slice() {
        let g = ScanGeometry::default();
        let py = g.pitch_y();
        let y = |s: usize| (s as f64 + 0.5) * py;
        let cloud = pc(
            &[
                [1.0, y(40), 1.0],
                [1.2, y(40), 1.1],
                [1.1, y(41), 1.0],
                [1.1, y(60), 1.0],
            ],
            &[true; 4],
        );
        let galvo = GalvoParams::near_identity(1.5, 1.5);
        let t = locate_tip(&cloud, &[0, 1, 2, 3], &g, &galvo, false).unwrap();
        assert_eq!(t.slice, 40);
        assert_eq!(t.n_points, 2);
        assert!((t.raw - Vector3::new(1.1, y(40), 1.05)).norm() < 1e-12);
        assert!((t.corrected - t.raw).norm() < 1e-4);
        let r = locate_tip(&cloud, &[0, 1, 2, 3], &g, &galvo, true).unwrap();
        assert_eq!(r.slice, 60);
        assert!(locate_tip(&cloud, &[], &g, &galvo, false).is_err());
    }

    #[test]
    fn downsampling_merges_and_ors_votes() {
        let g = ScanGeometry::new([0.1, 0.1, 0.1], [10, 2, 10]).unwrap();
        let mut fg = Mask::new(10, 10);
        let mut needle = Mask::new(10, 10);
        fg.set(0, 0, true);
        fg.set(1, 0, true);
        fg.set(9, 9, true);
        needle.set(1, 0, true);
        let empty = Mask::new(10, 10);
        let cloud = masks_to_cloud(&g, &[(&fg, &needle), (&empty, &empty)], 0.05).unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(cloud.points[0].b);
        assert!((cloud.points[0].p.x - 0.01).abs() < 1e-12);
        let full = masks_to_cloud(&g, &[(&fg, &needle), (&empty, &empty)], 0.0).unwrap();
        assert_eq!(full.len(), 3);
        assert_eq!(full.votes(), 1);
    }

    #[test]
    fn leaf_merge_examples() {
        let five = pc(
            &[
                [0.001, 0.001, 0.001],
                [0.019, 0.002, 0.010],
                [0.010, 0.018, 0.005],
                [0.004, 0.012, 0.019],
                [0.016, 0.007, 0.015],
            ],
            &[false; 5],
        );
        let d = downsample(&five, 0.02).unwrap();
        assert_eq!(d.len(), 1);
        let mean = five.positions().iter().sum::<Vector3<f64>>() / 5.0;
        assert!((d.points[0].p - mean).norm() < 1e-15);

        let spaced: Vec<[f64; 3]> = (0..40).map(|i| [0.005 + 0.05 * i as f64, 0.3, 0.7]).collect();
        assert_eq!(downsample(&pc(&spaced, &[false; 40]), 0.02).unwrap().len(), 40);
    }

    #[test]
    fn downsampled_count_matches_grid_hash() {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000);
        let pts: Vec<[f64; 3]> = (0..10_000)
            .map(|_| [rng.random::<f64>() * 0.6, rng.random::<f64>() * 0.6, rng.random::<f64>() * 0.6])
            .collect();
        let cloud = pc(&pts, &vec![false; pts.len()]);
        let leaf = 0.02;
        let occupied: std::collections::HashSet<(i64, i64, i64)> = pts
            .iter()
            .map(|p| {
                let cell = |v: f64| (v / leaf).floor() as i64;
                (cell(p[0]), cell(p[1]), cell(p[2]))
            })
            .collect();
        assert!(occupied.len() > 5_000 && occupied.len() < 10_000);
        assert_eq!(downsample(&cloud, leaf).unwrap().len(), occupied.len());
    }

    #[test]
    fn cloud_text_export() {
        let cloud = pc(&[[1.0, 2.0, 3.5]], &[true]);
        assert_eq!(cloud.to_text(), "1.000000 2.000000 3.500000 1\n");
    }

    fn sphere_cap(c: Vector3<f64>, r: f64, n: usize, seed: u64, noise: f64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, noise.max(1e-300)).unwrap();
        (0..n)
            .map(|_| {
                // Upper cap (negative z is up), polar angle up to 70°.
                let th = rng.random::<f64>() * 70f64.to_radians();
                let ph = rng.random::<f64>() * std::f64::consts::TAU;
                let d = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), -th.cos());
                let e = if noise > 0.0 { nd.sample(&mut rng) } else { 0.0 };
                c + d * (r + e)
            })
            .collect()
    }

    #[test]
    fn exact_four_points() {
        let c = Vector3::new(0.3, -0.2, 1.0);
        let pts = [
            c + Vector3::new(0.5, 0.0, 0.0),
            c + Vector3::new(0.0, 0.5, 0.0),
            c + Vector3::new(0.0, 0.0, 0.5),
            c + Vector3::new(-0.3, 0.4, 0.0),
        ];
        let (cc, r) = sphere_from_four([&pts[0], &pts[1], &pts[2], &pts[3]]).unwrap();
        assert!((cc - c).norm() < 1e-12 && (r - 0.5).abs() < 1e-12);
        let flat = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
        ];
        assert!(sphere_from_four([&flat[0], &flat[1], &flat[2], &flat[3]]).is_none());
    }

    #[test]
    fn ransac_ignores_outliers() {
        let c = Vector3::new(1.5, 1.5, 1.2);
        let mut pts = sphere_cap(c, 0.25, 400, 1, 0.002);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            pts.push(Vector3::new(rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, 1.6 + rng.random::<f64>() * 0.05));
        }
        let fit = fit_sphere_ransac(&pts, 0.25, &RansacParams::default()).unwrap();
        assert!((fit.center - c).norm() < 0.003, "{:?}", fit.center);
        assert!((fit.radius - 0.25).abs() < 0.003);
        let again = fit_sphere_ransac(&pts, 0.25, &RansacParams::default()).unwrap();
        assert_eq!(fit, again);
    }

    #[test]
    fn ransac_exact_cap() {
        let c = Vector3::new(0.0, 0.0, 2.0);
        let pts = sphere_cap(c, 0.4, 200, 2, 0.0);
        let fit = fit_sphere_ransac(&pts, 0.4, &RansacParams::default()).unwrap();
        assert!((fit.center - c).norm() < 1e-9);
        assert_eq!(fit.inliers.len(), 200);
    }

    fn full_sphere(c: Vector3<f64>, r: f64, n: usize) -> Vec<Vector3<f64>> {
        // Fibonacci lattice: deterministic, near-uniform on the whole sphere.
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let ph = golden * i as f64;
                c + Vector3::new(rho * ph.cos(), rho * ph.sin(), z) * r
            })
            .collect()
    }

    #[test]
    fn ransac_full_sphere_exact() {
        let c = Vector3::new(1.0, 1.0, 1.0);
        let fit = fit_sphere_ransac(&full_sphere(c, 0.25, 500), 0.25, &RansacParams::default()).unwrap();
        assert!((fit.center - c).norm() < 1e-6, "{:?}", fit.center);
        assert!((fit.radius - 0.25).abs() < 1e-6);
    }

    #[test]
    fn ransac_full_sphere_with_uniform_outliers() {
        let c = Vector3::new(1.0, 1.0, 1.0);
        let mut pts = full_sphere(c, 0.25, 500);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        // 20% of the final cloud drawn uniformly from the bounding box.
        for _ in 0..125 {
            pts.push(Vector3::new(
                0.5 + rng.random::<f64>(),
                0.5 + rng.random::<f64>(),
                0.5 + rng.random::<f64>(),
            ));
        }
        let fit = fit_sphere_ransac(&pts, 0.25, &RansacParams::default()).unwrap();
        assert!((fit.center - c).norm() < 0.002, "{:?}", fit.center);
    }

    #[test]
    fn ransac_failures() {
        let pts: Vec<Vector3<f64>> = (0..50).map(|i| Vector3::new(i as f64 * 0.01, (i % 7) as f64 * 0.01, 0.0)).collect();
        assert!(matches!(
            fit_sphere_ransac(&pts, 0.25, &RansacParams::default()),
            Err(Error::NoConsensus(_))
        ));
        assert!(matches!(
            fit_sphere_ransac(&pts[..3], 0.25, &RansacParams::default()),
            Err(Error::TooFewPoints { .. })
        ));
    }
}
