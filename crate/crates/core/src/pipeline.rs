//! Per-volume detection: needle tip (segmentation, clustering, voting) or
//! ball-marker centre (sphere fit), corrected for galvo distortion.

use nalgebra::Vector3;

use crate::cloud::{
    cluster_euclidean, fit_sphere_ransac, locate_tip, segment_needle, CloudBuilder, PointCloud, RansacParams,
    SphereFit, TipDetection,
};
use crate::distortion::{correct_point, GalvoParams};
use crate::error::Result;
use crate::segmentation::{foreground, label_needle_pixels, Mask, SegmentationParams};
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionParams {
    pub segmentation: SegmentationParams,
    /// Voxel-grid leaf size, mm.
    pub leaf: f64,
    /// Cluster distance threshold, mm.
    pub cluster_t: f64,
    /// Take the tip at the highest slice index instead of the lowest.
    pub reverse_scan: bool,
    pub ransac: RansacParams,
    /// Expected marker radius, mm.
    pub ball_radius: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            segmentation: SegmentationParams::default(),
            leaf: 0.02,
            cluster_t: 0.1,
            reverse_scan: false,
            ransac: RansacParams::default(),
            ball_radius: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeedleDetection {
    pub tip: TipDetection,
    pub cloud: PointCloud,
    pub n_clusters: usize,
    /// Indices of the winning cluster in `cloud`.
    pub needle: Vec<usize>,
}

/// Labeled, downsampled point cloud of a volume.
pub fn labeled_cloud(volume: &Volume, params: &DetectionParams) -> Result<PointCloud> {
    let mut builder = CloudBuilder::new(*volume.geometry());
    for (iy, bscan) in volume.bscans().enumerate() {
        let lab = label_needle_pixels(&bscan, &params.segmentation);
        builder.add_bscan(iy, &lab.foreground, &lab.needle)?;
    }
    builder.finish(params.leaf)
}

pub fn detect_needle_tip(volume: &Volume, galvo: &GalvoParams, params: &DetectionParams) -> Result<NeedleDetection> {
    let cloud = labeled_cloud(volume, params)?;
    let clusters = cluster_euclidean(&cloud, params.cluster_t);
    let needle = segment_needle(&cloud, &clusters)?.to_vec();
    let tip = locate_tip(&cloud, &needle, volume.geometry(), galvo, params.reverse_scan)?;
    Ok(NeedleDetection {
        tip,
        cloud,
        n_clusters: clusters.len(),
        needle,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerDetection {
    pub fit: SphereFit,
    /// Sphere centre after distortion correction.
    pub corrected: Vector3<f64>,
    pub cloud: PointCloud,
}

/// Unlabeled foreground cloud, as used by the marker detector.
pub fn foreground_cloud(volume: &Volume, params: &DetectionParams) -> Result<PointCloud> {
    let g = volume.geometry();
    let mut builder = CloudBuilder::new(*g);
    let none = Mask::new(g.n_x, g.n_z);
    for (iy, bscan) in volume.bscans().enumerate() {
        let fg = foreground(&bscan, &params.segmentation);
        builder.add_bscan(iy, &fg, &none)?;
    }
    builder.finish(params.leaf)
}

pub fn detect_marker(volume: &Volume, galvo: &GalvoParams, params: &DetectionParams) -> Result<MarkerDetection> {
    let cloud = foreground_cloud(volume, params)?;
    if cloud.is_empty() {
        return Err(crate::Error::Empty("point cloud"));
    }
    let fit = fit_sphere_ransac(&cloud.positions(), params.ball_radius, &params.ransac)?;
    let corrected = correct_point(&fit.center, galvo);
    Ok(MarkerDetection { fit, corrected, cloud })
}
