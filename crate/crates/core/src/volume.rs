//! Volumetric raster model and its on-disk format.
//!
//! A volume is a stack of B-scans. Axes:
//!
//! * `x` lateral position inside a B-scan (`n_x` A-scans),
//! * `y` across B-scans (`n_y` B-scans),
//! * `z` depth, increasing into the scene (`n_z` samples per A-scan).
//!
//! Voxels are stored row-major in `(iy, iz, ix)` order so that every B-scan is
//! one contiguous `n_z × n_x` slab. The physical position of a voxel is its
//! cell center, `(i + 0.5) · pitch` on each axis.
//!
//! # File format
//!
//! A volume is a text header plus a companion raw file. The header is a list
//! of `key = value` lines (`#` starts a comment):
//!
//! ```text
//! format = octcal-volume-1
//! n_x = 512
//! n_y = 128
//! n_z = 512
//! extent_x_mm = 3.01000
//! extent_y_mm = 3.10000
//! extent_z_mm = 2.60000
//! layout = iy-iz-ix
//! raw_file = pose_000.raw
//! ```
//!
//! `raw_file` is resolved relative to the header's directory and holds exactly
//! `n_x · n_y · n_z` unsigned bytes in `(iy, iz, ix)` order. Extents are
//! written with at least six significant digits and parse back bit-exactly.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{fmt_f64, parse_f64, parse_key_values};

pub const FORMAT_TAG: &str = "octcal-volume-1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGeometry {
    pub extent_x_mm: f64,
    pub extent_y_mm: f64,
    pub extent_z_mm: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
}

impl Default for ScanGeometry {
    /// 3.01 × 3.10 × 2.60 mm, 512 A-scans per B-scan, 128 B-scans, 512 axial
    /// samples.
    fn default() -> Self {
        ScanGeometry {
            extent_x_mm: 3.01,
            extent_y_mm: 3.10,
            extent_z_mm: 2.60,
            n_x: 512,
            n_y: 128,
            n_z: 512,
        }
    }
}

impl ScanGeometry {
    pub fn new(
        extent_mm: [f64; 3],
        counts: [usize; 3],
    ) -> Result<Self> {
        let g = ScanGeometry {
            extent_x_mm: extent_mm[0],
            extent_y_mm: extent_mm[1],
            extent_z_mm: extent_mm[2],
            n_x: counts[0],
            n_y: counts[1],
            n_z: counts[2],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("extent_x_mm", self.extent_x_mm),
            ("extent_y_mm", self.extent_y_mm),
            ("extent_z_mm", self.extent_z_mm),
        ] {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} must be positive, got {e}")));
            }
        }
        for (name, n) in [("n_x", self.n_x), ("n_y", self.n_y), ("n_z", self.n_z)] {
            if n < 2 {
                return Err(Error::InvalidGeometry(format!("{name} must be at least 2, got {n}")));
            }
        }
        let p = self.pitch();
        if !(p.iter().all(|v| v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidGeometry("voxel pitch is not finite".into()));
        }
        if self
            .n_x
            .checked_mul(self.n_y)
            .and_then(|v| v.checked_mul(self.n_z))
            .is_none()
        {
            return Err(Error::InvalidGeometry("voxel count overflows".into()));
        }
        Ok(())
    }

    pub fn pitch_x(&self) -> f64 {
        self.extent_x_mm / self.n_x as f64
    }

    pub fn pitch_y(&self) -> f64 {
        self.extent_y_mm / self.n_y as f64
    }

    pub fn pitch_z(&self) -> f64 {
        self.extent_z_mm / self.n_z as f64
    }

    pub fn pitch(&self) -> Vector3<f64> {
        Vector3::new(self.pitch_x(), self.pitch_y(), self.pitch_z())
    }

    pub fn extent(&self) -> Vector3<f64> {
        Vector3::new(self.extent_x_mm, self.extent_y_mm, self.extent_z_mm)
    }

    pub fn voxel_count(&self) -> usize {
        self.n_x * self.n_y * self.n_z
    }

    pub fn bscan_len(&self) -> usize {
        self.n_x * self.n_z
    }

    /// Center of voxel `(ix, iy, iz)` in mm, without range checks.
    pub fn center_mm(&self, ix: usize, iy: usize, iz: usize) -> Vector3<f64> {
        Vector3::new(
            (ix as f64 + 0.5) * self.pitch_x(),
            (iy as f64 + 0.5) * self.pitch_y(),
            (iz as f64 + 0.5) * self.pitch_z(),
        )
    }

    /// Index of the B-scan whose slab contains `y_mm`, clamped to the grid.
    pub fn slice_of(&self, y_mm: f64) -> usize {
        let i = (y_mm / self.pitch_y()).floor();
        i.clamp(0.0, (self.n_y - 1) as f64) as usize
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0.0..=self.extent_x_mm).contains(&p.x)
            && (0.0..=self.extent_y_mm).contains(&p.y)
            && (0.0..=self.extent_z_mm).contains(&p.z)
    }
}

/// A borrowed B-scan: `height` rows (depth) of `width` columns (lateral).
#[derive(Debug, Clone, Copy)]
pub struct BScan<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [u8],
    /// Lateral pixel pitch in mm.
    pub pitch_lateral: f64,
    /// Axial pixel pitch in mm.
    pub pitch_axial: f64,
}

impl<'a> BScan<'a> {
    pub fn new(width: usize, height: usize, data: &'a [u8], pitch_lateral: f64, pitch_axial: f64) -> Self {
        assert_eq!(data.len(), width * height, "B-scan buffer does not match its dimensions");
        BScan {
            width,
            height,
            data,
            pitch_lateral,
            pitch_axial,
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iz: usize) -> u8 {
        self.data[iz * self.width + ix]
    }

    /// Physical `(lateral, depth)` position of a pixel center.
    pub fn pixel_mm(&self, ix: usize, iz: usize) -> [f64; 2] {
        [
            (ix as f64 + 0.5) * self.pitch_lateral,
            (iz as f64 + 0.5) * self.pitch_axial,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: ScanGeometry,
    voxels: Vec<u8>,
}

impl Volume {
    pub fn new(geometry: ScanGeometry, voxels: Vec<u8>) -> Result<Self> {
        geometry.validate()?;
        if voxels.len() != geometry.voxel_count() {
            return Err(Error::SizeMismatch {
                expected: geometry.voxel_count(),
                actual: voxels.len(),
            });
        }
        Ok(Volume { geometry, voxels })
    }

    pub fn filled(geometry: ScanGeometry, value: u8) -> Result<Self> {
        geometry.validate()?;
        Ok(Volume {
            voxels: vec![value; geometry.voxel_count()],
            geometry,
        })
    }

    pub fn geometry(&self) -> &ScanGeometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<u8> {
        self.voxels
    }

    #[inline]
    pub fn offset(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iy * self.geometry.n_z + iz) * self.geometry.n_x + ix
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> Option<u8> {
        let g = &self.geometry;
        (ix < g.n_x && iy < g.n_y && iz < g.n_z).then(|| self.voxels[self.offset(ix, iy, iz)])
    }

    pub fn bscan(&self, iy: usize) -> BScan<'_> {
        let g = &self.geometry;
        let len = g.bscan_len();
        BScan::new(g.n_x, g.n_z, &self.voxels[iy * len..(iy + 1) * len], g.pitch_x(), g.pitch_z())
    }

    pub fn bscans(&self) -> impl Iterator<Item = BScan<'_>> {
        (0..self.geometry.n_y).map(move |iy| self.bscan(iy))
    }

    pub fn voxel_to_mm(&self, ix: usize, iy: usize, iz: usize) -> Result<Vector3<f64>> {
        let g = &self.geometry;
        if ix >= g.n_x || iy >= g.n_y || iz >= g.n_z {
            return Err(Error::IndexOutOfRange { ix, iy, iz });
        }
        Ok(g.center_mm(ix, iy, iz))
    }

    /// Index of the voxel containing `p`; positions on the far boundary map to
    /// the last voxel.
    pub fn mm_to_voxel(&self, p: &Vector3<f64>) -> Result<(usize, usize, usize)> {
        let g = &self.geometry;
        if !g.contains(p) {
            return Err(Error::OutsideVolume(p.x, p.y, p.z));
        }
        let idx = |v: f64, pitch: f64, n: usize| ((v / pitch).floor() as usize).min(n - 1);
        Ok((
            idx(p.x, g.pitch_x(), g.n_x),
            idx(p.y, g.pitch_y(), g.n_y),
            idx(p.z, g.pitch_z(), g.n_z),
        ))
    }
}

fn raw_path_for(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

pub fn header_text(geometry: &ScanGeometry, raw_file: &str) -> String {
    let g = geometry;
    format!(
        "# octcal volume header\n\
         format = {FORMAT_TAG}\n\
         n_x = {}\n\
         n_y = {}\n\
         n_z = {}\n\
         extent_x_mm = {}\n\
         extent_y_mm = {}\n\
         extent_z_mm = {}\n\
         layout = iy-iz-ix\n\
         raw_file = {raw_file}\n",
        g.n_x,
        g.n_y,
        g.n_z,
        fmt_f64(g.extent_x_mm, 6),
        fmt_f64(g.extent_y_mm, 6),
        fmt_f64(g.extent_z_mm, 6),
    )
}

/// Writes `<path>` (header) and the raw file next to it (`<stem>.raw`).
pub fn save_volume(volume: &Volume, path: &Path) -> Result<()> {
    let raw = raw_path_for(path);
    let raw_name = raw
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::format(path, "header path has no usable file name"))?
        .to_string();
    std::fs::write(&raw, &volume.voxels).map_err(|e| Error::io(&raw, e))?;
    crate::text::write_string(path, &header_text(&volume.geometry, &raw_name))
}

pub fn load_volume(path: &Path) -> Result<Volume> {
    let text = crate::text::read_to_string(path)?;
    let mut n = [None::<usize>; 3];
    let mut ext = [None::<f64>; 3];
    let mut raw_file = None;
    for (k, v) in parse_key_values(&text, path)? {
        match k.as_str() {
            "format" if v != FORMAT_TAG => {
                return Err(Error::format(path, format!("unsupported format '{v}'")))
            }
            "layout" if v != "iy-iz-ix" => {
                return Err(Error::format(path, format!("unsupported layout '{v}'")))
            }
            "n_x" | "n_y" | "n_z" => {
                let i = (k.as_bytes()[2] - b'x') as usize;
                let parsed = v
                    .parse::<i64>()
                    .map_err(|_| Error::format(path, format!("{k}: '{v}' is not an integer")))?;
                if parsed <= 0 {
                    return Err(Error::InvalidGeometry(format!("{k} must be positive, got {parsed}")));
                }
                n[i] = Some(parsed as usize);
            }
            "extent_x_mm" | "extent_y_mm" | "extent_z_mm" => {
                let i = (k.as_bytes()[7] - b'x') as usize;
                ext[i] = Some(parse_f64(&v, &k, path)?);
            }
            "raw_file" => raw_file = Some(v),
            _ => {}
        }
    }
    let missing = |what: &str| Error::format(path, format!("missing key '{what}'"));
    let geometry = ScanGeometry {
        extent_x_mm: ext[0].ok_or_else(|| missing("extent_x_mm"))?,
        extent_y_mm: ext[1].ok_or_else(|| missing("extent_y_mm"))?,
        extent_z_mm: ext[2].ok_or_else(|| missing("extent_z_mm"))?,
        n_x: n[0].ok_or_else(|| missing("n_x"))?,
        n_y: n[1].ok_or_else(|| missing("n_y"))?,
        n_z: n[2].ok_or_else(|| missing("n_z"))?,
    };
    geometry.validate()?;
    let raw = match raw_file {
        Some(name) => path.parent().unwrap_or(Path::new(".")).join(name),
        None => raw_path_for(path),
    };
    let voxels = std::fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    Volume::new(geometry, voxels)
}
