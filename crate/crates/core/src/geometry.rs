//! Pinhole projection, pixel back-projection and closest-point triangulation.
//!
//! World coordinates are millimeters. A calibration is a 3x4 projection
//! matrix normalized so that points in front of the camera have a positive
//! homogeneous `w`.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, SymmetricEigen, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Below this |w| a projection is treated as singular.
pub const MIN_HOMOGENEOUS_W: f64 = 1e-12;
/// Normal matrices worse conditioned than this reject triangulation.
pub const MAX_CONDITION_NUMBER: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraId(pub String);

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CameraId {
    fn from(s: &str) -> Self {
        CameraId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Result of projecting a world point into an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: PixelCoord,
    pub in_front: bool,
    pub in_image: bool,
}

impl Projection {
    /// Usable for heat map lookup: in front of the camera and inside the image.
    pub fn is_visible(&self) -> bool {
        self.in_front && self.in_image
    }
}

/// A calibrated pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    camera_id: CameraId,
    projection: Matrix3x4<f64>,
    image_width: u32,
    image_height: u32,
    left_inverse: Matrix3<f64>,
    center: Point3,
}

impl CameraCalibration {
    /// Builds a calibration from a projection matrix in millimeter world units.
    pub fn new(camera_id: impl Into<CameraId>, projection: Matrix3x4<f64>, image_width: u32, image_height: u32) -> Result<Self> {
        let camera_id = camera_id.into();
        let invalid = |reason: &str| Error::InvalidCalibration { camera: camera_id.0.clone(), reason: reason.to_owned() };
        if projection.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite projection entry"));
        }
        if image_width == 0 || image_height == 0 {
            return Err(invalid("zero image dimension"));
        }
        let svd = projection.svd(false, false);
        let s_max = svd.singular_values.max();
        let s_min = svd.singular_values.min();
        if !(s_max > 0.0) || s_min <= 1e-12 * s_max {
            return Err(invalid("projection matrix is not rank 3"));
        }
        let mut projection = projection;
        let mut left: Matrix3<f64> = projection.fixed_view::<3, 3>(0, 0).into_owned();
        let block = left.singular_values();
        if !(block.min() > 1e-12 * block.max()) {
            return Err(invalid("left 3x3 block is singular (camera center at infinity)"));
        }
        if left.determinant() < 0.0 {
            projection = -projection;
            left = -left;
        }
        let left_inverse = left.try_inverse().ok_or_else(|| invalid("left 3x3 block is not invertible"))?;
        let p4: Vector3<f64> = projection.column(3).into_owned();
        let center = Point3::from(-(left_inverse * p4));
        if !center.iter().all(|v| v.is_finite()) {
            return Err(invalid("camera center is not finite"));
        }
        Ok(Self { camera_id, projection, image_width, image_height, left_inverse, center })
    }

    pub fn camera_id(&self) -> &CameraId {
        &self.camera_id
    }

    pub fn projection_matrix(&self) -> &Matrix3x4<f64> {
        &self.projection
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn contains(&self, px: PixelCoord) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.image_width as f64 && px.y < self.image_height as f64
    }

    pub fn project(&self, p: &Point3) -> Result<Projection> {
        let h = self.projection * p.to_homogeneous();
        let w = h.z;
        if !(w.abs() >= MIN_HOMOGENEOUS_W) {
            return Err(Error::DegenerateProjection { w });
        }
        let pixel = PixelCoord::new(h.x / w, h.y / w);
        Ok(Projection { pixel, in_front: w > 0.0, in_image: self.contains(pixel) })
    }

    pub fn backproject(&self, px: PixelCoord) -> Ray {
        let d = self.left_inverse * Vector3::new(px.x, px.y, 1.0);
        Ray::new(self.center, d)
    }
}

/// A half-line from `origin` along a unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3,
    direction: Unit<Vector3<f64>>,
}

impl Ray {
    /// Normalizes `direction`; panics on a zero vector.
    pub fn new(origin: Point3, direction: Vector3<f64>) -> Self {
        let direction = Unit::try_new(direction, 1e-300).expect("ray direction must be nonzero");
        Self { origin, direction }
    }

    pub fn direction(&self) -> &Vector3<f64> {
        self.direction.as_ref()
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction.as_ref() * t
    }

    pub fn reversed(&self) -> Ray {
        Ray { origin: self.origin, direction: -self.direction }
    }

    /// Perpendicular distance from `p` to the supporting line.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        let v = p - self.origin;
        (v - self.direction.as_ref() * v.dot(self.direction.as_ref())).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Point3,
    /// RMS perpendicular distance from `point` to the rays, mm.
    pub residual: f64,
}

/// Least-squares point closest to all rays.
///
/// Solves `sum(I - d d^T) x = sum(I - d d^T) o` over the supporting lines,
/// relative to the mean origin. Two rays use the closed form through their
/// common normal, which keeps nearly parallel pairs accurate.
pub fn triangulate(rays: &[Ray]) -> Result<Triangulation> {
    if rays.len() < 2 {
        return Err(Error::DegenerateConfiguration { condition: f64::INFINITY });
    }
    let center = rays.iter().fold(Vector3::zeros(), |acc, r| acc + r.origin.coords) / rays.len() as f64;
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for ray in rays {
        let d = ray.direction();
        let projector = Matrix3::identity() - d * d.transpose();
        rhs += projector * (ray.origin.coords - center);
        normal += projector;
    }
    let eigen = SymmetricEigen::new(normal);
    let lo = eigen.eigenvalues.min();
    let hi = eigen.eigenvalues.max();
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION_NUMBER) {
        return Err(Error::DegenerateConfiguration { condition });
    }
    let point = match rays {
        [a, b] => perpendicular_midpoint(a, b),
        _ => {
            let x = normal.lu().solve(&rhs).ok_or(Error::DegenerateConfiguration { condition })?;
            Point3::from(x + center)
        }
    };
    let sq: f64 = rays.iter().map(|r| r.distance_to(&point).powi(2)).sum();
    Ok(Triangulation { point, residual: (sq / rays.len() as f64).sqrt() })
}

fn perpendicular_midpoint(a: &Ray, b: &Ray) -> Point3 {
    let (da, db) = (a.direction(), b.direction());
    let n = da.cross(db);
    let nn = n.norm_squared();
    let w = b.origin - a.origin;
    let s = w.cross(db).dot(&n) / nn;
    let t = w.cross(da).dot(&n) / nn;
    Point3::from((a.at(s).coords + b.at(t).coords) * 0.5)
}

/// Distance between the closest points of the two supporting lines.
pub fn pairwise_ray_distance(r1: &Ray, r2: &Ray) -> f64 {
    let d1 = r1.direction();
    let d2 = r2.direction();
    let w = r1.origin - r2.origin;
    let cross = d1.cross(d2);
    let cross_norm = cross.norm();
    if cross_norm < 1e-12 {
        // Parallel: distance from r2's origin to r1's line.
        return r1.distance_to(&r2.origin);
    }
    (w.dot(&cross) / cross_norm).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Mm,
    Cm,
    M,
}

impl LengthUnit {
    pub fn millimeters(self) -> f64 {
        match self {
            LengthUnit::Mm => 1.0,
            LengthUnit::Cm => 10.0,
            LengthUnit::M => 1000.0,
        }
    }
}

/// One camera entry of a calibration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub camera_id: CameraId,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_unit")]
    pub units: LengthUnit,
}

fn default_unit() -> LengthUnit {
    LengthUnit::Mm
}

impl CalibrationRecord {
    pub fn into_calibration(self) -> Result<CameraCalibration> {
        if self.p.len() != 12 {
            return Err(Error::InvalidCalibration {
                camera: self.camera_id.0,
                reason: format!("P must have 12 entries, got {}", self.p.len()),
            });
        }
        let mut p = Matrix3x4::from_row_slice(&self.p);
        // P maps declared units; rescale so it consumes millimeters.
        let k = self.units.millimeters();
        for c in 0..3 {
            for r in 0..3 {
                p[(r, c)] /= k;
            }
        }
        CameraCalibration::new(self.camera_id, p, self.width, self.height)
    }

    pub fn from_calibration(cal: &CameraCalibration) -> Self {
        let m = cal.projection_matrix();
        let p = (0..3).flat_map(|r| (0..4).map(move |c| m[(r, c)])).collect();
        Self { camera_id: cal.camera_id().clone(), p, width: cal.image_width(), height: cal.image_height(), units: LengthUnit::Mm }
    }
}

pub fn parse_calibrations(json: &str) -> serde_json::Result<Vec<CalibrationRecord>> {
    serde_json::from_str(json)
}

pub fn load_calibrations(path: &Path) -> Result<Vec<CameraCalibration>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = parse_calibrations(&text).map_err(|e| Error::json(path, e))?;
    records.into_iter().map(CalibrationRecord::into_calibration).collect()
}

pub fn calibrations_to_json(cals: &[CameraCalibration]) -> String {
    let records: Vec<_> = cals.iter().map(CalibrationRecord::from_calibration).collect();
    serde_json::to_string_pretty(&records).expect("calibration records serialize")
}

/// Builds a look-at pinhole camera. Handy for synthetic scenes and tests.
pub fn look_at_camera(
    camera_id: impl Into<CameraId>,
    eye: Point3,
    target: Point3,
    focal_px: f64,
    image_width: u32,
    image_height: u32,
) -> Result<CameraCalibration> {
    let forward = (target - eye).normalize();
    let world_up = Vector3::z();
    let mut right = forward.cross(&world_up);
    if right.norm() < 1e-9 {
        right = forward.cross(&Vector3::x());
    }
    let right = right.normalize();
    // Image y grows downward.
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let translation = -(rotation * eye.coords);
    let k = Matrix3::new(focal_px, 0.0, image_width as f64 / 2.0, 0.0, focal_px, image_height as f64 / 2.0, 0.0, 0.0, 1.0);
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
    rt.set_column(3, &translation);
    CameraCalibration::new(camera_id, k * rt, image_width, image_height)
}
