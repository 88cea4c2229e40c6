//! C interface to `octcal`.
//!
//! Every function returns an [`OctcalStatus`]; on failure the message is
//! available through [`octcal_last_error`] on the calling thread. Volumes are
//! opaque handles released with [`octcal_volume_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::{Matrix3, Vector3};
use octcal::distortion::{correct_point, distort_point, GalvoParams};
use octcal::pipeline::{detect_marker, detect_needle_tip, DetectionParams};
use octcal::registration::{calib_error, solve_handeye, Correspondences, Method, RigidTransform};
use octcal::segmentation::{SegmentationParams, NEEDLE_DIAMETER_MM};
use octcal::volume::{load_volume, ScanGeometry, Volume};
use octcal::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OctcalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    /// Degenerate geometry or too few points.
    Degenerate = 5,
    /// Nothing to detect in the volume.
    NotFound = 6,
    NotInvertible = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OctcalMethod {
    Svdt = 0,
    Qt = 1,
    Qkt = 2,
}

/// Virtual pivot centers of the two scan mirrors, mm.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctcalGalvo {
    pub x_c: f64,
    pub z_xc: f64,
    pub y_c: f64,
    pub z_yc: f64,
}

/// Rigid transform `p' = rotation · p + translation`; `rotation` is row-major.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctcalTransform {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

/// Opaque OCT volume.
pub struct OctcalVolume(Volume);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OctcalStatus {
    match e {
        Error::Io { .. } => OctcalStatus::Io,
        Error::Format { .. } | Error::SizeMismatch { .. } => OctcalStatus::Format,
        Error::Degenerate(_) | Error::TooFewPoints { .. } | Error::LengthMismatch(..) => OctcalStatus::Degenerate,
        Error::NoNeedleEvidence | Error::NoConsensus(_) | Error::Empty(_) | Error::NoSurface(_) => {
            OctcalStatus::NotFound
        }
        Error::NotInvertible => OctcalStatus::NotInvertible,
        Error::Pose { source, .. } => status_of(source),
        _ => OctcalStatus::InvalidArgument,
    }
}

struct Fail(OctcalStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(OctcalStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OctcalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OctcalStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic".into());
            OctcalStatus::Panic
        }
    }
}

unsafe fn read_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn points(p: *const f64, n: usize, what: &str) -> Result<Vec<Vector3<f64>>, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, 3 * n);
    Ok(s.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect())
}

impl From<OctcalGalvo> for GalvoParams {
    fn from(g: OctcalGalvo) -> Self {
        GalvoParams {
            x_c: g.x_c,
            z_xc: g.z_xc,
            y_c: g.y_c,
            z_yc: g.z_yc,
        }
    }
}

impl From<&RigidTransform> for OctcalTransform {
    fn from(t: &RigidTransform) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[3 * r + c] = t.rotation[(r, c)];
            }
        }
        OctcalTransform {
            rotation,
            translation: t.translation.into(),
        }
    }
}

impl From<&OctcalTransform> for RigidTransform {
    fn from(t: &OctcalTransform) -> Self {
        RigidTransform::new(Matrix3::from_row_slice(&t.rotation), Vector3::from(t.translation))
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn octcal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Pivot centers of the reference scanner.
#[no_mangle]
pub extern "C" fn octcal_galvo_default() -> OctcalGalvo {
    let g = GalvoParams::default();
    OctcalGalvo {
        x_c: g.x_c,
        z_xc: g.z_xc,
        y_c: g.y_c,
        z_yc: g.z_yc,
    }
}

/// Loads a volume from its `.hdr` header path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn octcal_volume_load(path: *const c_char, out: *mut *mut OctcalVolume) -> OctcalStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(OctcalStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let v = load_volume(Path::new(p))?;
        write_out(out, Box::into_raw(Box::new(OctcalVolume(v))), "out")
    })
}

/// Builds a volume from `n_x · n_y · n_z` bytes, x fastest, then z, then y
/// (one contiguous B-scan per y index).
///
/// # Safety
/// `data` must point to `len` readable bytes; `extent_mm` to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn octcal_volume_from_raw(
    n_x: usize,
    n_y: usize,
    n_z: usize,
    extent_mm: *const f64,
    data: *const u8,
    len: usize,
    out: *mut *mut OctcalVolume,
) -> OctcalStatus {
    guard(|| {
        if extent_mm.is_null() {
            return Err(null("extent_mm"));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        let e = std::slice::from_raw_parts(extent_mm, 3);
        let g = ScanGeometry::new([e[0], e[1], e[2]], [n_x, n_y, n_z])?;
        let v = Volume::new(g, std::slice::from_raw_parts(data, len).to_vec())?;
        write_out(out, Box::into_raw(Box::new(OctcalVolume(v))), "out")
    })
}

/// # Safety
/// `volume` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn octcal_volume_free(volume: *mut OctcalVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// Writes `[n_x, n_y, n_z]` to `dims`.
///
/// # Safety
/// `volume` must be a live handle; `dims` must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn octcal_volume_dims(volume: *const OctcalVolume, dims: *mut usize) -> OctcalStatus {
    guard(|| {
        let g = read_ref(volume, "volume")?.0.geometry();
        if dims.is_null() {
            return Err(null("dims"));
        }
        std::slice::from_raw_parts_mut(dims, 3).copy_from_slice(&[g.n_x, g.n_y, g.n_z]);
        Ok(())
    })
}

/// Raw (distorted) position to corrected space.
///
/// # Safety
/// `raw` and `out` must each hold 3 doubles; `galvo` must be valid.
#[no_mangle]
pub unsafe extern "C" fn octcal_correct_point(
    galvo: *const OctcalGalvo,
    raw: *const f64,
    out: *mut f64,
) -> OctcalStatus {
    guard(|| {
        let g: GalvoParams = (*read_ref(galvo, "galvo")?).into();
        let p = points(raw, 1, "raw")?[0];
        write_out(out.cast::<[f64; 3]>(), correct_point(&p, &g).into(), "out")
    })
}

/// Corrected position back to raw scanner coordinates.
///
/// # Safety
/// As for [`octcal_correct_point`].
#[no_mangle]
pub unsafe extern "C" fn octcal_distort_point(
    galvo: *const OctcalGalvo,
    corrected: *const f64,
    out: *mut f64,
) -> OctcalStatus {
    guard(|| {
        let g: GalvoParams = (*read_ref(galvo, "galvo")?).into();
        let p = points(corrected, 1, "corrected")?[0];
        write_out(out.cast::<[f64; 3]>(), distort_point(&p, &g)?.into(), "out")
    })
}

fn default_detection(g: &ScanGeometry) -> DetectionParams {
    DetectionParams {
        segmentation: SegmentationParams::for_geometry(g, NEEDLE_DIAMETER_MM),
        ..DetectionParams::default()
    }
}

/// Detects the needle tip with default parameters and writes its corrected
/// position (mm) to `tip`.
///
/// # Safety
/// `volume` must be a live handle, `galvo` valid, `tip` hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn octcal_detect_needle_tip(
    volume: *const OctcalVolume,
    galvo: *const OctcalGalvo,
    tip: *mut f64,
) -> OctcalStatus {
    guard(|| {
        let v = &read_ref(volume, "volume")?.0;
        let g: GalvoParams = (*read_ref(galvo, "galvo")?).into();
        let d = detect_needle_tip(v, &g, &default_detection(v.geometry()))?;
        write_out(tip.cast::<[f64; 3]>(), d.tip.corrected.into(), "tip")
    })
}

/// Fits a ball marker of `radius_mm` and writes its corrected centre.
///
/// # Safety
/// As for [`octcal_detect_needle_tip`].
#[no_mangle]
pub unsafe extern "C" fn octcal_detect_marker(
    volume: *const OctcalVolume,
    galvo: *const OctcalGalvo,
    radius_mm: f64,
    center: *mut f64,
) -> OctcalStatus {
    guard(|| {
        let v = &read_ref(volume, "volume")?.0;
        let g: GalvoParams = (*read_ref(galvo, "galvo")?).into();
        let mut params = default_detection(v.geometry());
        params.ball_radius = radius_mm;
        let d = detect_marker(v, &g, &params)?;
        write_out(center.cast::<[f64; 3]>(), d.corrected.into(), "center")
    })
}

/// Solves `robot_i ≈ X · camera_i` for `n` point pairs (`3n` doubles each).
///
/// # Safety
/// `robot` and `camera` must hold `3n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn octcal_solve_handeye(
    method: OctcalMethod,
    robot: *const f64,
    camera: *const f64,
    n: usize,
    out: *mut OctcalTransform,
) -> OctcalStatus {
    guard(|| {
        let c = Correspondences::new(points(robot, n, "robot")?, points(camera, n, "camera")?)?;
        let m = match method {
            OctcalMethod::Svdt => Method::Svdt,
            OctcalMethod::Qt => Method::Qt,
            OctcalMethod::Qkt => Method::Qkt,
        };
        let x = solve_handeye(&c, m)?;
        write_out(out, OctcalTransform::from(&x), "out")
    })
}

/// Per-pair calibration errors in µm into `errors` (n values) and their mean
/// into `mean_um`. Either output may be null.
///
/// # Safety
/// `robot`/`camera` must hold `3n` doubles, `errors` (if non-null) `n`.
#[no_mangle]
pub unsafe extern "C" fn octcal_calib_error(
    robot: *const f64,
    camera: *const f64,
    n: usize,
    transform: *const OctcalTransform,
    errors: *mut f64,
    mean_um: *mut f64,
) -> OctcalStatus {
    guard(|| {
        let c = Correspondences::new(points(robot, n, "robot")?, points(camera, n, "camera")?)?;
        let x = RigidTransform::from(read_ref(transform, "transform")?);
        let report = calib_error(&c, &x)?;
        if !errors.is_null() {
            std::slice::from_raw_parts_mut(errors, n).copy_from_slice(&report.errors);
        }
        if !mean_um.is_null() {
            mean_um.write(report.mean);
        }
        Ok(())
    })
}
